#include "spectrai/core/gating.hpp"

#include <algorithm>
#include <string>

namespace spectrai {

std::string_view to_string(NetworkFamily family) {
  switch (family) {
    case NetworkFamily::UNet2D: return "UNet2D";
    case NetworkFamily::ResUNet1D: return "ResUNet1D";
    case NetworkFamily::HyperRCAN: return "HyperRCAN";
    case NetworkFamily::SpectralCNN1D: return "SpectralCNN1D";
  }
  return "unknown";
}

NetworkFamily parse_family(std::string_view text) {
  for (auto f : kAllFamilies)
    if (to_string(f) == text) return f;
  throw ParseError("unknown network family '" + std::string(text) + "'");
}

std::string_view to_string(LossKind loss) {
  switch (loss) {
    case LossKind::L1: return "l1";
    case LossKind::Mse: return "mse";
    case LossKind::CrossEntropy: return "cross_entropy";
  }
  return "unknown";
}

LossKind parse_loss(std::string_view text) {
  for (auto l : kAllLosses)
    if (to_string(l) == text) return l;
  throw ParseError("unknown loss '" + std::string(text) + "'");
}

std::vector<NetworkFamily> permitted_families(TaskKind task) {
  switch (task) {
    case TaskKind::SpectrumDenoising: return {NetworkFamily::ResUNet1D};
    case TaskKind::ImageDenoising: return {NetworkFamily::UNet2D};
    case TaskKind::SpectrumClassification: return {NetworkFamily::SpectralCNN1D};
    case TaskKind::ImageClassification: return {NetworkFamily::UNet2D};
    case TaskKind::Segmentation: return {NetworkFamily::UNet2D};
    case TaskKind::SuperResolution: return {NetworkFamily::HyperRCAN};
  }
  return {};
}

std::vector<LossKind> permitted_losses(TaskKind task) {
  switch (task) {
    case TaskKind::SpectrumClassification:
    case TaskKind::ImageClassification:
    case TaskKind::Segmentation:
      return {LossKind::CrossEntropy};
    case TaskKind::SpectrumDenoising:
    case TaskKind::ImageDenoising:
    case TaskKind::SuperResolution:
      return {LossKind::L1, LossKind::Mse};
  }
  return {};
}

bool family_permitted(TaskKind task, NetworkFamily family) {
  const auto f = permitted_families(task);
  return std::find(f.begin(), f.end(), family) != f.end();
}

bool loss_permitted(TaskKind task, LossKind loss) {
  const auto l = permitted_losses(task);
  return std::find(l.begin(), l.end(), loss) != l.end();
}

void require_family(TaskKind task, NetworkFamily family) {
  if (!family_permitted(task, family))
    throw GateError("network not suitable for task: " + std::string(to_string(family)) + " cannot serve " +
                    std::string(to_string(task)));
}

void require_loss(TaskKind task, LossKind loss) {
  if (!loss_permitted(task, loss))
    throw GateError("loss not suitable for task: " + std::string(to_string(loss)) + " cannot serve " +
                    std::string(to_string(task)));
}

}  // namespace spectrai
