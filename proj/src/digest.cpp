#include "rla/digest.hpp"

#include <openssl/evp.h>

#include <array>
#include <memory>

#include "rla/errors.hpp"

namespace rla {

std::string sha256_hex(std::string_view bytes) {
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), md.data(), &len) != 1) {
        throw Error("sha256 failed");
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(kHex[md[i] >> 4]);
        out.push_back(kHex[md[i] & 0xf]);
    }
    return out;
}

std::string cvr_digest(const CvrTable& table) {
    // Length-prefixed identifiers keep the encoding unambiguous for arbitrary bytes.
    std::string buf = std::to_string(table.batch_index);
    buf.push_back('\n');
    for (const auto& r : table.rows) {
        buf += std::to_string(r.identifier.size());
        buf.push_back(':');
        buf += r.identifier;
        buf.push_back(static_cast<char>('0' + r.votes_w));
        buf.push_back(static_cast<char>('0' + r.votes_l));
        buf.push_back('\n');
    }
    return sha256_hex(buf);
}

}  // namespace rla
