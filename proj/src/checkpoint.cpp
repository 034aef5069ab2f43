#include "dmfuse/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace dmfuse {

namespace {

constexpr char kMagic[8] = {'D', 'M', 'F', 'C', 'K', 'P', 'T', '1'};
constexpr uint32_t kKindRecon = 1;
constexpr uint32_t kKindFusion = 2;

void write_u32(std::ostream& out, uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
void write_u64(std::ostream& out, uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }
void write_string(std::ostream& out, const std::string& s) {
    write_u32(out, static_cast<uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

uint32_t read_u32(std::istream& in) {
    uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    return v;
}
uint64_t read_u64(std::istream& in) {
    uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 8);
    return v;
}
std::string read_string(std::istream& in) {
    const uint32_t n = read_u32(in);
    std::string s(n, '\0');
    in.read(s.data(), n);
    return s;
}

void write_params(std::ostream& out, const nn::ParamStore& store) {
    write_u64(out, store.all().size());
    for (const auto& p : store.all()) {
        write_string(out, p->name);
        write_u32(out, static_cast<uint32_t>(p->value.c));
        write_u32(out, static_cast<uint32_t>(p->value.h));
        write_u32(out, static_cast<uint32_t>(p->value.w));
        out.write(reinterpret_cast<const char*>(p->value.data()),
                  static_cast<std::streamsize>(p->value.size() * sizeof(double)));
    }
}

void read_params(std::istream& in, nn::ParamStore& store, const std::string& path) {
    const uint64_t count = read_u64(in);
    if (count != store.all().size()) throw std::runtime_error("checkpoint " + path + ": parameter count mismatch");
    for (const auto& p : store.all()) {
        const std::string name = read_string(in);
        if (name != p->name) throw std::runtime_error("checkpoint " + path + ": parameter order mismatch at " + name);
        const uint32_t c = read_u32(in), h = read_u32(in), w = read_u32(in);
        if (static_cast<int>(c) != p->value.c || static_cast<int>(h) != p->value.h || static_cast<int>(w) != p->value.w)
            throw std::runtime_error("checkpoint " + path + ": shape mismatch at " + name);
        in.read(reinterpret_cast<char*>(p->value.data()), static_cast<std::streamsize>(p->value.size() * sizeof(double)));
    }
    if (!in) throw std::runtime_error("checkpoint " + path + ": truncated file");
}

void check_header(std::istream& in, uint32_t want_kind, const std::string& path) {
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0) throw std::runtime_error("checkpoint " + path + ": bad magic");
    const uint32_t kind = read_u32(in);
    if (kind != want_kind) throw std::runtime_error("checkpoint " + path + ": wrong checkpoint kind");
}

}  // namespace

void save_reconstructor(const std::string& path, const Reconstructor& net, const FusionConfig& config) {
    if (!(net.arch() == config.recon_arch()))
        throw std::runtime_error("checkpoint: network architecture does not match the config");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
    out.write(kMagic, 8);
    write_u32(out, kKindRecon);
    write_string(out, config.recon_arch_digest());
    write_u64(out, net.seed());
    write_params(out, net.params());
}

std::unique_ptr<Reconstructor> load_reconstructor(const std::string& path, const FusionConfig& config) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    check_header(in, kKindRecon, path);
    const std::string digest = read_string(in);
    if (digest != config.recon_arch_digest())
        throw std::runtime_error("checkpoint " + path + ": architecture digest mismatch with config");
    const uint64_t seed = read_u64(in);
    auto net = std::make_unique<Reconstructor>(config.recon_arch(), seed);
    read_params(in, net->params(), path);
    return net;
}

void save_fusion(const std::string& path, const FusionNet& net, const FusionConfig& config) {
    if (!(net.arch() == config.fusion_arch()))
        throw std::runtime_error("checkpoint: network architecture does not match the config");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
    out.write(kMagic, 8);
    write_u32(out, kKindFusion);
    write_string(out, config.fusion_arch_digest());
    write_string(out, config.recon_arch_digest());
    write_u64(out, net.seed());
    write_params(out, net.params());
}

std::unique_ptr<FusionNet> load_fusion(const std::string& path, const FusionConfig& config) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    check_header(in, kKindFusion, path);
    const std::string fdigest = read_string(in);
    const std::string rdigest = read_string(in);
    if (fdigest != config.fusion_arch_digest() || rdigest != config.recon_arch_digest())
        throw std::runtime_error("checkpoint " + path + ": architecture digest mismatch with config");
    const uint64_t seed = read_u64(in);
    auto net = std::make_unique<FusionNet>(config.fusion_arch(), seed);
    read_params(in, net->params(), path);
    return net;
}

}  // namespace dmfuse
