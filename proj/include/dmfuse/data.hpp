#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dmfuse/png_io.hpp"

namespace dmfuse::data {

/// Which complementary-information profile the pair carries. The dense
/// profile pairs a soft-tissue texture image with a bright-rim, sparse
/// high-intensity structural image; the functional profile pairs it with
/// smooth saturated color blobs.
enum class PhantomTask { StructuralDense, StructuralFunctional };

std::string task_name(PhantomTask task);
PhantomTask task_from_name(const std::string& name);

struct PhantomSpec {
    uint64_t seed = 0;
    int size = 64;  // divisible by 16
    PhantomTask task = PhantomTask::StructuralDense;
    double blob_density = 1.0;
    double edge_density = 1.0;
};

struct PhantomPair {
    GrayImage a;  // texture-rich structural modality
    AnyImage b;   // gray for StructuralDense, color for StructuralFunctional
};

/// Pure generator: the same spec always yields bit-identical pixels.
PhantomPair gen_phantom_pair(const PhantomSpec& spec);

/// One line of the pair manifest. Paths are relative to the manifest file.
struct PairEntry {
    std::string pair_id, path_a, path_b, task, split, digest_a, digest_b;
};

/// Line-oriented text format:
/// pair_id<TAB>path_A<TAB>path_B<TAB>task<TAB>split<TAB>digest_A<TAB>digest_B
void write_manifest(const std::string& path, const std::vector<PairEntry>& entries);
std::vector<PairEntry> read_manifest(const std::string& path);

struct LoadedPair {
    std::string pair_id, task, split;
    GrayImage a;
    AnyImage b;
};

/// Decodes every referenced pair, verifying file digests and matching
/// dimensions; failures name the offending pair.
std::vector<LoadedPair> load_pairs(const std::string& manifest_path);

}  // namespace dmfuse::data
