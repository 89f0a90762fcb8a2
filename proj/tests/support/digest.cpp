#include "digest.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <sstream>

namespace metacp::testing {

std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xf];
  }
  return out;
}

std::string read_golden(std::string_view file_name) {
  std::ifstream in(std::string(METACP_GOLDEN_DIR) + "/" + std::string(file_name), std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace metacp::testing
