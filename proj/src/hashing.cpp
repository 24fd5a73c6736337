#include "seqtune/hashing.hpp"

#include <openssl/evp.h>

#include <cstdint>
#include <stdexcept>

#include "seqtune/model.hpp"

namespace seqtune {

namespace {

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) {
      throw std::runtime_error("sha256: init failed");
    }
  }
  ~Sha256() { EVP_MD_CTX_free(ctx_); }
  void update(const void* data, size_t len) {
    if (EVP_DigestUpdate(ctx_, data, len) != 1) throw std::runtime_error("sha256: update failed");
  }
  std::string hex() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int n = 0;
    if (EVP_DigestFinal_ex(ctx_, md, &n) != 1) throw std::runtime_error("sha256: final failed");
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(2 * n);
    for (unsigned int i = 0; i < n; ++i) {
      out.push_back(digits[md[i] >> 4]);
      out.push_back(digits[md[i] & 0xf]);
    }
    return out;
  }

 private:
  EVP_MD_CTX* ctx_;
};

}  // namespace

std::string sha256_hex(const void* data, size_t len) {
  Sha256 h;
  h.update(data, len);
  return h.hex();
}

std::string hash_named_tensors(const std::vector<std::pair<std::string, Tensor>>& tensors) {
  Sha256 h;
  for (const auto& [name, t] : tensors) {
    h.update(name.data(), name.size());
    for (size_t d : t.shape()) {
      const uint64_t v = d;
      h.update(&v, sizeof(v));
    }
    h.update(t.data(), t.numel() * sizeof(double));
  }
  return h.hex();
}

bool is_task_head_param(const std::string& name) {
  return name == "embed.table" || name == "head.w" || name == "head.b";
}

std::string backbone_hash(const Seq2SeqModel& model) {
  std::vector<std::pair<std::string, Tensor>> backbone;
  for (const auto& [name, t] : model.base_params().items()) {
    if (!is_task_head_param(name)) backbone.emplace_back(name, t);
  }
  return hash_named_tensors(backbone);
}

}  // namespace seqtune
