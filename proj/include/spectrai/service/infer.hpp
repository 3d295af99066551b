#pragma once

#include <map>
#include <string>

#include "spectrai/core/error.hpp"

namespace spectrai::service {

class Service;

class UnknownCheckpoint : public Error {
 public:
  using Error::Error;
};

/// Transport-neutral inference request. JSON bodies carry "spectrum" (one
/// list) or "spectra" (list of lists) and optionally "checkpoint". Binary
/// bodies are float32 little-endian cubes in (y, x, band) order, described by
/// `shape` = "H,W,B".
struct InferRequest {
  std::string content_type;
  std::string body;
  std::string checkpoint;  // "<experiment>/<latest|best>"
  std::string shape;
  std::string baseline;    // "bicubic" returns the interpolated input instead
};

struct InferReply {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
  std::map<std::string, std::string> headers;
};

/// Cubes come back as float32 with X-Shape "H,W,B"; masks as uint16 with
/// X-Shape "H,W" and the class table in X-Classes.
InferReply infer(Service& service, const InferRequest& request);

}  // namespace spectrai::service
