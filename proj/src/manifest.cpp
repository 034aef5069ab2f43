#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dmfuse/data.hpp"
#include "dmfuse/digest.hpp"

namespace dmfuse::data {

namespace fs = std::filesystem;

void write_manifest(const std::string& path, const std::vector<PairEntry>& entries) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_manifest: cannot open " + path);
    for (const auto& e : entries)
        out << e.pair_id << '\t' << e.path_a << '\t' << e.path_b << '\t' << e.task << '\t' << e.split << '\t'
            << e.digest_a << '\t' << e.digest_b << '\n';
}

std::vector<PairEntry> read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_manifest: cannot open " + path);
    std::vector<PairEntry> entries;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        PairEntry e;
        std::string fields[7];
        for (int i = 0; i < 7; ++i)
            if (!std::getline(ss, fields[i], '\t'))
                throw std::runtime_error("read_manifest: malformed line " + std::to_string(lineno) + " in " + path);
        e.pair_id = fields[0];
        e.path_a = fields[1];
        e.path_b = fields[2];
        e.task = fields[3];
        e.split = fields[4];
        e.digest_a = fields[5];
        e.digest_b = fields[6];
        entries.push_back(std::move(e));
    }
    return entries;
}

std::vector<LoadedPair> load_pairs(const std::string& manifest_path) {
    const fs::path base = fs::path(manifest_path).parent_path();
    std::vector<LoadedPair> pairs;
    for (const auto& e : read_manifest(manifest_path)) {
        const auto resolve = [&](const std::string& rel) { return (base / rel).string(); };
        const std::string pa = resolve(e.path_a), pb = resolve(e.path_b);
        for (const auto& [p, want] : {std::pair{pa, e.digest_a}, std::pair{pb, e.digest_b}}) {
            if (!fs::exists(p)) throw std::runtime_error("load_pairs: pair " + e.pair_id + ": missing file " + p);
            const std::string got = sha256_file(p);
            if (got != want)
                throw std::runtime_error("load_pairs: pair " + e.pair_id + ": digest mismatch for " + p);
        }
        AnyImage a = read_png(pa);
        AnyImage b = read_png(pb);
        const GrayImage* ga = std::get_if<GrayImage>(&a);
        if (!ga) throw std::runtime_error("load_pairs: pair " + e.pair_id + ": modality A must be grayscale");
        const GrayImage lb = luma_of(b);
        if (ga->height() != lb.height() || ga->width() != lb.width())
            throw std::runtime_error("load_pairs: pair " + e.pair_id + ": dimension mismatch between A and B");
        pairs.push_back(LoadedPair{e.pair_id, e.task, e.split, *ga, std::move(b)});
    }
    return pairs;
}

}  // namespace dmfuse::data
