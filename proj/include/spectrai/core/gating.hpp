#pragma once

#include <string_view>
#include <vector>

#include "spectrai/core/types.hpp"

namespace spectrai {

enum class NetworkFamily { UNet2D, ResUNet1D, HyperRCAN, SpectralCNN1D };
enum class LossKind { L1, Mse, CrossEntropy };

inline constexpr NetworkFamily kAllFamilies[] = {NetworkFamily::UNet2D, NetworkFamily::ResUNet1D,
                                                 NetworkFamily::HyperRCAN, NetworkFamily::SpectralCNN1D};
inline constexpr LossKind kAllLosses[] = {LossKind::L1, LossKind::Mse, LossKind::CrossEntropy};

std::string_view to_string(NetworkFamily family);
NetworkFamily parse_family(std::string_view text);
std::string_view to_string(LossKind loss);
LossKind parse_loss(std::string_view text);

// Task gating table. build_network, config validation and the service's
// task listing all read these functions; nothing else encodes the rules.
std::vector<NetworkFamily> permitted_families(TaskKind task);
std::vector<LossKind> permitted_losses(TaskKind task);
bool family_permitted(TaskKind task, NetworkFamily family);
bool loss_permitted(TaskKind task, LossKind loss);

/// Throws GateError("network not suitable for task") on mismatch.
void require_family(TaskKind task, NetworkFamily family);
void require_loss(TaskKind task, LossKind loss);

}  // namespace spectrai
