#include "spectrai/service/infer.hpp"

#include <bit>
#include <charconv>
#include <cstring>

#include <nlohmann/json.hpp>

#include "spectrai/pipeline/filters.hpp"
#include "spectrai/service/service.hpp"
#include "spectrai/train/trainer.hpp"

namespace spectrai::service {

namespace {

using nlohmann::json;
using train::Model;

static_assert(std::endian::native == std::endian::little, "binary payloads assume a little-endian host");

InferReply json_reply(int status, const json& body) { return {status, "application/json", body.dump(), {}}; }

InferReply error_reply(int status, const std::string& message, json extra = json::object()) {
  extra["error"] = message;
  return json_reply(status, extra);
}

std::vector<Index> parse_shape(const std::string& text) {
  std::vector<Index> dims;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    const std::string part = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    long v = 0;
    auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
    if (ec != std::errc() || p != part.data() + part.size() || v < 1)
      throw ParseError("X-Shape must be positive integers H,W,B");
    dims.push_back(v);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (dims.size() != 3) throw ParseError("X-Shape must be H,W,B");
  return dims;
}

std::string shape_text(std::initializer_list<Index> dims) {
  std::string s;
  for (Index d : dims) s += (s.empty() ? "" : ",") + std::to_string(d);
  return s;
}

json label_json(const train::Prediction& p) {
  std::vector<float> scores(p.scores.data(), p.scores.data() + p.scores.size());
  return {{"index", p.label->index}, {"name", p.label->name}, {"scores", scores}};
}

InferReply cube_reply(const Hypercube& cube, const std::string& task) {
  std::string body(static_cast<std::size_t>(cube.pixels().size()) * sizeof(float), '\0');
  std::memcpy(body.data(), cube.pixels().data(), body.size());
  return {200, "application/octet-stream", std::move(body),
          {{"X-Shape", shape_text({cube.height(), cube.width(), cube.bands()})}, {"X-Task", task}}};
}

InferReply mask_reply(const SegmentationMask& mask, const std::string& task) {
  std::string body(static_cast<std::size_t>(mask.labels().size()) * 2, '\0');
  for (Index i = 0; i < mask.labels().size(); ++i) {
    const auto v = static_cast<std::uint16_t>(mask.labels().data()[i]);
    std::memcpy(body.data() + 2 * i, &v, 2);
  }
  return {200, "application/octet-stream", std::move(body),
          {{"X-Shape", shape_text({mask.height(), mask.width()})},
           {"X-Classes", json(mask.class_table()).dump()},
           {"X-Task", task}}};
}

Spectrum spectrum_from_json(const json& values, const json& body) {
  if (!values.is_array() || values.empty()) throw ParseError("spectrum must be a non-empty list of numbers");
  Eigen::VectorXf v(static_cast<Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!values[i].is_number()) throw ParseError("spectrum entry " + std::to_string(i) + " is not a number");
    v[static_cast<Index>(i)] = values[i].get<float>();
  }
  if (body.contains("wavelengths")) return Spectrum(std::move(v), WavelengthAxis(body.at("wavelengths").get<std::vector<double>>()));
  return Spectrum(std::move(v));
}

json spectrum_output(Model& m, const Spectrum& s) {
  const auto p = train::predict(m, s);
  if (p.spectrum) {
    const auto& v = p.spectrum->values();
    return std::vector<float>(v.data(), v.data() + v.size());
  }
  return label_json(p);
}

InferReply infer_json(Model& m, const json& body, const std::string& checkpoint) {
  const std::string task(to_string(m.config.task));
  json out{{"checkpoint", checkpoint}, {"task", task}};
  const bool labels = !train::is_regression(m.config.task);
  if (body.contains("spectrum")) {
    out[labels ? "label" : "spectrum"] = spectrum_output(m, spectrum_from_json(body.at("spectrum"), body));
  } else if (body.contains("spectra")) {
    json list = json::array();
    for (const auto& s : body.at("spectra")) list.push_back(spectrum_output(m, spectrum_from_json(s, body)));
    out[labels ? "labels" : "spectra"] = list;
  } else {
    return error_reply(400, "JSON body needs spectrum or spectra; send cubes as application/octet-stream");
  }
  return json_reply(200, out);
}

InferReply infer_cube(Model& m, const Hypercube& cube, const std::string& baseline) {
  const std::string task(to_string(m.config.task));
  if (!baseline.empty()) {
    if (baseline != "bicubic" || m.config.task != TaskKind::SuperResolution)
      return error_reply(400, "baseline " + baseline + " does not apply to " + task);
    const Index s = m.net.scale();
    return cube_reply(bicubic_resize(cube, cube.height() * s, cube.width() * s), task);
  }
  const auto p = train::predict(m, cube);
  if (p.cube) return cube_reply(*p.cube, task);
  if (p.mask) return mask_reply(*p.mask, task);
  return json_reply(200, {{"task", task}, {"label", label_json(p)}});
}

json expected_bands(const Model& m) {
  const auto f = m.config.network.family;
  if (f == NetworkFamily::ResUNet1D || f == NetworkFamily::SpectralCNN1D)
    return m.spectrum_length ? json(*m.spectrum_length) : json(nullptr);
  return m.config.network.in_channels;
}

}  // namespace

InferReply infer(Service& service, const InferRequest& in) {
  try {
    const bool is_json = in.content_type.rfind("application/json", 0) == 0 ||
                         (in.content_type.empty() && !in.body.empty() && in.body.front() == '{');
    if (is_json) {
      const json body = json::parse(in.body);
      const std::string checkpoint = body.value("checkpoint", in.checkpoint);
      if (checkpoint.empty()) return error_reply(400, "checkpoint required");
      return service.with_model(checkpoint, [&](Model& m) {
        try {
          return infer_json(m, body, checkpoint);
        } catch (const ShapeError& e) {
          return error_reply(400, e.what(), {{"expected_bands", expected_bands(m)}});
        }
      });
    }
    if (in.checkpoint.empty()) return error_reply(400, "checkpoint required (X-Checkpoint header or ?checkpoint=)");
    if (in.shape.empty()) return error_reply(400, "X-Shape header required for binary payloads");
    const auto dims = parse_shape(in.shape);
    const std::size_t want = static_cast<std::size_t>(dims[0] * dims[1] * dims[2]) * sizeof(float);
    if (in.body.size() != want)
      return error_reply(400, "body has " + std::to_string(in.body.size()) + " bytes, X-Shape needs " +
                                  std::to_string(want));
    Hypercube::Matrix px(dims[0] * dims[1], dims[2]);
    std::memcpy(px.data(), in.body.data(), want);
    const Hypercube cube(dims[0], dims[1], std::move(px), WavelengthAxis::synthetic(dims[2]));
    return service.with_model(in.checkpoint, [&](Model& m) {
      try {
        return infer_cube(m, cube, in.baseline);
      } catch (const ShapeError& e) {
        return error_reply(400, e.what(), {{"expected_bands", expected_bands(m)}});
      }
    });
  } catch (const UnknownCheckpoint& e) {
    return error_reply(404, e.what());
  } catch (const nlohmann::json::exception& e) {
    return error_reply(400, std::string("malformed JSON: ") + e.what());
  } catch (const ParseError& e) {
    return error_reply(400, e.what());
  } catch (const ShapeError& e) {
    return error_reply(400, e.what());
  } catch (const RangeError& e) {
    return error_reply(400, e.what());
  } catch (const std::exception& e) {
    return error_reply(500, e.what());
  }
}

}  // namespace spectrai::service
