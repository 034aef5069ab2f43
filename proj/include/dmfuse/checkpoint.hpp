#pragma once

#include <memory>
#include <string>

#include "dmfuse/config.hpp"

namespace dmfuse {

/// Versioned little-endian binary weight files. Each checkpoint embeds the
/// architecture digest of the config that produced it; loading verifies
/// the digest and rejects mismatched architectures.
void save_reconstructor(const std::string& path, const Reconstructor& net, const FusionConfig& config);
std::unique_ptr<Reconstructor> load_reconstructor(const std::string& path, const FusionConfig& config);

/// Fusion checkpoints also embed the reconstructor digest so a fusion head
/// cannot load over a different backbone.
void save_fusion(const std::string& path, const FusionNet& net, const FusionConfig& config);
std::unique_ptr<FusionNet> load_fusion(const std::string& path, const FusionConfig& config);

}  // namespace dmfuse
