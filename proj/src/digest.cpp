#include "dmfuse/digest.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <memory>
#include <stdexcept>

namespace dmfuse {

namespace {

std::string to_hex(const unsigned char* md, unsigned len) {
    static const char* digits = "0123456789abcdef";
    std::string out(len * 2, '0');
    for (unsigned i = 0; i < len; ++i) {
        out[2 * i] = digits[md[i] >> 4];
        out[2 * i + 1] = digits[md[i] & 0xF];
    }
    return out;
}

}  // namespace

std::string sha256_hex(const void* data, size_t len) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned md_len = 0;
    if (!EVP_Digest(data, len, md, &md_len, EVP_sha256(), nullptr))
        throw std::runtime_error("sha256: digest failure");
    return to_hex(md, md_len);
}

std::string sha256_hex(const std::string& s) { return sha256_hex(s.data(), s.size()); }
std::string sha256_hex(const std::vector<uint8_t>& bytes) { return sha256_hex(bytes.data(), bytes.size()); }

std::string sha256_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("sha256_file: cannot open " + path);
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    if (!ctx || !EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr))
        throw std::runtime_error("sha256_file: init failure");
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof(buf));
        if (in.gcount() > 0 && !EVP_DigestUpdate(ctx.get(), buf, static_cast<size_t>(in.gcount())))
            throw std::runtime_error("sha256_file: update failure");
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned md_len = 0;
    if (!EVP_DigestFinal_ex(ctx.get(), md, &md_len)) throw std::runtime_error("sha256_file: final failure");
    return to_hex(md, md_len);
}

}  // namespace dmfuse
