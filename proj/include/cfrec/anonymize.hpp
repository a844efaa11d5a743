#pragma once

#include <memory>
#include <string>

#include <openssl/evp.h>
#include <openssl/params.h>

#include "cfrec/errors.hpp"

namespace cfrec {

// Keyed one-way pseudonymization of raw user identifiers: HMAC-SHA256 of the
// raw id, truncated to 128 bits and hex-encoded. The same (key, id) pair
// always maps to the same pseudonym, and the mapping cannot be reversed or
// replayed without the key.
class Pseudonymizer {
 public:
  explicit Pseudonymizer(std::string key)
      : key_(std::move(key)),
        mac_(EVP_MAC_fetch(nullptr, "HMAC", nullptr), &EVP_MAC_free) {
    if (key_.empty()) {
      throw ValidationError("key", "anonymization key must be non-empty");
    }
    if (!mac_) {
      throw IoError("OpenSSL HMAC implementation unavailable");
    }
  }

  std::string operator()(const std::string& raw_user_id) const {
    std::unique_ptr<EVP_MAC_CTX, decltype(&EVP_MAC_CTX_free)> ctx(
        EVP_MAC_CTX_new(mac_.get()), &EVP_MAC_CTX_free);
    if (!ctx) throw IoError("failed to allocate HMAC context");

    char digest_name[] = "SHA256";
    OSSL_PARAM params[] = {
        OSSL_PARAM_construct_utf8_string("digest", digest_name, 0),
        OSSL_PARAM_construct_end(),
    };
    unsigned char out[EVP_MAX_MD_SIZE];
    std::size_t out_len = 0;
    if (EVP_MAC_init(ctx.get(),
                     reinterpret_cast<const unsigned char*>(key_.data()),
                     key_.size(), params) != 1 ||
        EVP_MAC_update(ctx.get(),
                       reinterpret_cast<const unsigned char*>(
                           raw_user_id.data()),
                       raw_user_id.size()) != 1 ||
        EVP_MAC_final(ctx.get(), out, &out_len, sizeof out) != 1) {
      throw IoError("HMAC computation failed");
    }

    static constexpr char kHex[] = "0123456789abcdef";
    std::string hex;
    hex.reserve(32);
    for (std::size_t i = 0; i < 16 && i < out_len; ++i) {
      hex.push_back(kHex[out[i] >> 4]);
      hex.push_back(kHex[out[i] & 0x0f]);
    }
    return hex;
  }

 private:
  std::string key_;
  std::unique_ptr<EVP_MAC, decltype(&EVP_MAC_free)> mac_;
};

}  // namespace cfrec
