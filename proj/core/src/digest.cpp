#include "mcpforge/digest.hpp"

#include <array>
#include <memory>

#include <openssl/evp.h>

#include "mcpforge/error.hpp"

namespace mcpforge {

namespace {

struct MdCtxDeleter {
    void operator()(EVP_MD_CTX* ctx) const { EVP_MD_CTX_free(ctx); }
};

class Sha256 {
public:
    Sha256() : ctx_(EVP_MD_CTX_new()) {
        if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) {
            fail(ErrorKind::internal, "sha256 init failed");
        }
    }

    void update(const void* data, std::size_t size) {
        if (EVP_DigestUpdate(ctx_.get(), data, size) != 1) {
            fail(ErrorKind::internal, "sha256 update failed");
        }
    }

    std::string hex() {
        std::array<unsigned char, EVP_MAX_MD_SIZE> out{};
        unsigned int len = 0;
        if (EVP_DigestFinal_ex(ctx_.get(), out.data(), &len) != 1) {
            fail(ErrorKind::internal, "sha256 final failed");
        }
        static constexpr char digits[] = "0123456789abcdef";
        std::string result;
        result.reserve(len * 2);
        for (unsigned int i = 0; i < len; ++i) {
            result.push_back(digits[out[i] >> 4]);
            result.push_back(digits[out[i] & 0x0f]);
        }
        return result;
    }

private:
    std::unique_ptr<EVP_MD_CTX, MdCtxDeleter> ctx_;
};

}  // namespace

std::string sha256_hex(std::string_view data) {
    Sha256 h;
    h.update(data.data(), data.size());
    return h.hex();
}

std::string sha256_hex(std::span<const std::uint8_t> data) {
    Sha256 h;
    h.update(data.data(), data.size());
    return h.hex();
}

std::string field_digest(std::initializer_list<std::string_view> fields) {
    Sha256 h;
    for (auto field : fields) {
        std::uint64_t n = field.size();
        unsigned char len[8];
        for (int i = 0; i < 8; ++i) len[i] = static_cast<unsigned char>(n >> (8 * i));
        h.update(len, sizeof len);
        h.update(field.data(), field.size());
    }
    return h.hex();
}

}  // namespace mcpforge
