/*
 * Copyright (C) 2026 The DexWeaver Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "dexweaver/signing.hpp"

#include <openssl/bn.h>
#include <openssl/core_names.h>
#include <openssl/evp.h>
#include <openssl/param_build.h>
#include <openssl/pem.h>
#include <openssl/pkcs7.h>
#include <openssl/x509.h>

#include <algorithm>
#include <ctime>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace dexweaver {

namespace {

[[noreturn]] void crypto_fail(const std::string& what) {
  fail(ErrorKind::CryptoFailure, what);
}

struct BnDeleter {
  void operator()(BIGNUM* bn) const { BN_free(bn); }
};
using BnPtr = std::unique_ptr<BIGNUM, BnDeleter>;

BnPtr bn_new() {
  BIGNUM* bn = BN_new();
  if (!bn) crypto_fail("BN_new");
  return BnPtr(bn);
}

// splitmix64: the deterministic byte stream behind seeded key generation.
class SeededStream {
 public:
  explicit SeededStream(uint64_t seed) : state_(seed) {}

  uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ull;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  void fill(uint8_t* out, size_t n) {
    for (size_t i = 0; i < n; i += 8) {
      uint64_t v = next();
      for (size_t b = 0; b < 8 && i + b < n; b++) {
        out[i + b] = static_cast<uint8_t>(v >> (8 * b));
      }
    }
  }

 private:
  uint64_t state_;
};

// Draws a 1024-bit candidate and walks forward to the next probable prime
// that keeps e = 65537 usable.
BnPtr seeded_prime(SeededStream& stream, BN_CTX* ctx) {
  uint8_t buf[128];
  stream.fill(buf, sizeof(buf));
  buf[0] |= 0xc0;                 // top two bits: full-width product
  buf[sizeof(buf) - 1] |= 0x01;   // odd
  BnPtr candidate = bn_new();
  if (!BN_bin2bn(buf, sizeof(buf), candidate.get())) crypto_fail("BN_bin2bn");

  BnPtr rem = bn_new();
  BnPtr e = bn_new();
  if (!BN_set_word(e.get(), 65537)) crypto_fail("BN_set_word");
  BnPtr p_minus_1 = bn_new();
  for (;;) {
    int rc = BN_check_prime(candidate.get(), ctx, nullptr);
    if (rc < 0) crypto_fail("BN_check_prime");
    if (rc == 1) {
      if (!BN_copy(p_minus_1.get(), candidate.get()) ||
          !BN_sub_word(p_minus_1.get(), 1) ||
          !BN_mod(rem.get(), p_minus_1.get(), e.get(), ctx)) {
        crypto_fail("BN arithmetic");
      }
      if (!BN_is_zero(rem.get())) return candidate;
    }
    if (!BN_add_word(candidate.get(), 2)) crypto_fail("BN_add_word");
  }
}

EVP_PKEY* rsa_from_primes(const BIGNUM* p, const BIGNUM* q, BN_CTX* ctx) {
  BnPtr n = bn_new(), e = bn_new(), d = bn_new();
  BnPtr p1 = bn_new(), q1 = bn_new(), lambda = bn_new(), gcd = bn_new();
  BnPtr dp = bn_new(), dq = bn_new(), qinv = bn_new();

  if (!BN_set_word(e.get(), 65537) || !BN_mul(n.get(), p, q, ctx) ||
      !BN_copy(p1.get(), p) || !BN_sub_word(p1.get(), 1) ||
      !BN_copy(q1.get(), q) || !BN_sub_word(q1.get(), 1) ||
      !BN_gcd(gcd.get(), p1.get(), q1.get(), ctx)) {
    crypto_fail("RSA parameter arithmetic");
  }
  // lambda = lcm(p-1, q-1)
  BnPtr product = bn_new();
  if (!BN_mul(product.get(), p1.get(), q1.get(), ctx) ||
      !BN_div(lambda.get(), nullptr, product.get(), gcd.get(), ctx)) {
    crypto_fail("RSA lcm");
  }
  if (!BN_mod_inverse(d.get(), e.get(), lambda.get(), ctx)) crypto_fail("RSA inverse");
  if (!BN_mod(dp.get(), d.get(), p1.get(), ctx) ||
      !BN_mod(dq.get(), d.get(), q1.get(), ctx) ||
      !BN_mod_inverse(qinv.get(), q, p, ctx)) {
    crypto_fail("RSA CRT parameters");
  }

  OSSL_PARAM_BLD* bld = OSSL_PARAM_BLD_new();
  if (!bld) crypto_fail("OSSL_PARAM_BLD_new");
  OSSL_PARAM* params = nullptr;
  EVP_PKEY* pkey = nullptr;
  EVP_PKEY_CTX* pctx = nullptr;
  bool ok = OSSL_PARAM_BLD_push_BN(bld, OSSL_PKEY_PARAM_RSA_N, n.get()) &&
            OSSL_PARAM_BLD_push_BN(bld, OSSL_PKEY_PARAM_RSA_E, e.get()) &&
            OSSL_PARAM_BLD_push_BN(bld, OSSL_PKEY_PARAM_RSA_D, d.get()) &&
            OSSL_PARAM_BLD_push_BN(bld, OSSL_PKEY_PARAM_RSA_FACTOR1, p) &&
            OSSL_PARAM_BLD_push_BN(bld, OSSL_PKEY_PARAM_RSA_FACTOR2, q) &&
            OSSL_PARAM_BLD_push_BN(bld, OSSL_PKEY_PARAM_RSA_EXPONENT1, dp.get()) &&
            OSSL_PARAM_BLD_push_BN(bld, OSSL_PKEY_PARAM_RSA_EXPONENT2, dq.get()) &&
            OSSL_PARAM_BLD_push_BN(bld, OSSL_PKEY_PARAM_RSA_COEFFICIENT1, qinv.get());
  if (ok) params = OSSL_PARAM_BLD_to_param(bld);
  if (params) {
    pctx = EVP_PKEY_CTX_new_from_name(nullptr, "RSA", nullptr);
    if (pctx && EVP_PKEY_fromdata_init(pctx) > 0) {
      EVP_PKEY_fromdata(pctx, &pkey, EVP_PKEY_KEYPAIR, params);
    }
  }
  EVP_PKEY_CTX_free(pctx);
  OSSL_PARAM_free(params);
  OSSL_PARAM_BLD_free(bld);
  if (!pkey) crypto_fail("EVP_PKEY_fromdata");
  return pkey;
}

X509* make_self_signed(EVP_PKEY* key, uint64_t serial) {
  X509* cert = X509_new();
  if (!cert) crypto_fail("X509_new");
  X509_set_version(cert, 2);
  ASN1_INTEGER_set_uint64(X509_get_serialNumber(cert), serial);
  X509_NAME* name = X509_get_subject_name(cert);
  X509_NAME_add_entry_by_txt(name, "CN", MBSTRING_ASC,
                             reinterpret_cast<const unsigned char*>("DexWeaver Signer"), -1,
                             -1, 0);
  X509_set_issuer_name(cert, name);
  // Fixed validity window keeps seeded identities byte-reproducible.
  ASN1_TIME_set_string(X509_getm_notBefore(cert), "20240101000000Z");
  ASN1_TIME_set_string(X509_getm_notAfter(cert), "20540101000000Z");
  if (!X509_set_pubkey(cert, key)) crypto_fail("X509_set_pubkey");
  if (!X509_sign(cert, key, EVP_sha256())) crypto_fail("X509_sign");
  return cert;
}

std::string read_file_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::CryptoFailure, "cannot open keystore " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string sha256_base64(BytesView bytes) {
  unsigned char digest[32];
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr);
  char encoded[64];
  int written = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(encoded), digest, 32);
  return std::string(encoded, written);
}

std::string sha256_base64(const std::string& text) {
  return sha256_base64(BytesView(reinterpret_cast<const uint8_t*>(text.data()), text.size()));
}

constexpr const char* kManifestName = "META-INF/MANIFEST.MF";
constexpr const char* kSignatureFileName = "META-INF/CERT.SF";
constexpr const char* kSignatureBlockName = "META-INF/CERT.RSA";
constexpr const char* kDigestAttr = "SHA-256-Digest";

// "Name: path\r\nSHA-256-Digest: ...\r\n\r\n" for one entry.
std::string manifest_section(const std::string& path, const std::string& digest) {
  return "Name: " + path + "\r\n" + kDigestAttr + ": " + digest + "\r\n\r\n";
}

struct ParsedManifest {
  std::map<std::string, std::string> digests;   // entry path -> base64 digest
  std::map<std::string, std::string> sections;  // entry path -> raw section text
};

ParsedManifest parse_manifest(const std::string& text) {
  ParsedManifest parsed;
  size_t pos = 0;
  // Skip the main section.
  size_t main_end = text.find("\r\n\r\n");
  if (main_end == std::string::npos) return parsed;
  pos = main_end + 4;
  while (pos < text.size()) {
    size_t section_end = text.find("\r\n\r\n", pos);
    if (section_end == std::string::npos) break;
    std::string section = text.substr(pos, section_end + 4 - pos);
    std::string name;
    std::string digest;
    std::istringstream lines(section);
    std::string line;
    while (std::getline(lines, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.rfind("Name: ", 0) == 0) name = line.substr(6);
      std::string digest_prefix = std::string(kDigestAttr) + ": ";
      if (line.rfind(digest_prefix, 0) == 0) digest = line.substr(digest_prefix.size());
    }
    if (!name.empty()) {
      parsed.digests[name] = digest;
      parsed.sections[name] = section;
    }
    pos = section_end + 4;
  }
  return parsed;
}

}  // namespace

SigningIdentity::SigningIdentity(EVP_PKEY* key, X509* cert) : key_(key), cert_(cert) {}

SigningIdentity::SigningIdentity(SigningIdentity&& other) noexcept
    : key_(other.key_), cert_(other.cert_) {
  other.key_ = nullptr;
  other.cert_ = nullptr;
}

SigningIdentity& SigningIdentity::operator=(SigningIdentity&& other) noexcept {
  if (this != &other) {
    EVP_PKEY_free(key_);
    X509_free(cert_);
    key_ = other.key_;
    cert_ = other.cert_;
    other.key_ = nullptr;
    other.cert_ = nullptr;
  }
  return *this;
}

SigningIdentity::~SigningIdentity() {
  EVP_PKEY_free(key_);
  X509_free(cert_);
}

std::string SigningIdentity::key_pem() const {
  BIO* bio = BIO_new(BIO_s_mem());
  PEM_write_bio_PrivateKey(bio, key_, nullptr, nullptr, 0, nullptr, nullptr);
  char* data = nullptr;
  long len = BIO_get_mem_data(bio, &data);
  std::string pem(data, len);
  BIO_free(bio);
  return pem;
}

std::string SigningIdentity::cert_pem() const {
  BIO* bio = BIO_new(BIO_s_mem());
  PEM_write_bio_X509(bio, cert_);
  char* data = nullptr;
  long len = BIO_get_mem_data(bio, &data);
  std::string pem(data, len);
  BIO_free(bio);
  return pem;
}

Bytes SigningIdentity::cert_der() const {
  unsigned char* der = nullptr;
  int len = i2d_X509(cert_, &der);
  if (len < 0) crypto_fail("i2d_X509");
  Bytes out(der, der + len);
  OPENSSL_free(der);
  return out;
}

SigningIdentity generate_identity(std::optional<uint64_t> seed) {
  BN_CTX* ctx = BN_CTX_new();
  if (!ctx) crypto_fail("BN_CTX_new");
  EVP_PKEY* pkey = nullptr;
  uint64_t serial = 1;
  if (seed) {
    SeededStream stream(*seed);
    BnPtr p = seeded_prime(stream, ctx);
    BnPtr q = seeded_prime(stream, ctx);
    if (BN_cmp(p.get(), q.get()) == 0) crypto_fail("degenerate prime pair");
    pkey = rsa_from_primes(p.get(), q.get(), ctx);
    serial = *seed | 1;
  } else {
    pkey = EVP_RSA_gen(2048);
    if (!pkey) {
      BN_CTX_free(ctx);
      crypto_fail("EVP_RSA_gen");
    }
    uint8_t rnd[8];
    SeededStream entropy(reinterpret_cast<uintptr_t>(pkey) ^
                         static_cast<uint64_t>(time(nullptr)));
    entropy.fill(rnd, sizeof(rnd));
    serial = 0;
    for (uint8_t b : rnd) serial = (serial << 8) | b;
    serial |= 1;
  }
  BN_CTX_free(ctx);
  X509* cert = make_self_signed(pkey, serial);
  return SigningIdentity(pkey, cert);
}

SigningIdentity identity_from_pem(const std::string& key_pem, const std::string& cert_pem) {
  BIO* key_bio = BIO_new_mem_buf(key_pem.data(), static_cast<int>(key_pem.size()));
  EVP_PKEY* key = PEM_read_bio_PrivateKey(key_bio, nullptr, nullptr, nullptr);
  BIO_free(key_bio);
  if (!key) crypto_fail("bad private key PEM");
  BIO* cert_bio = BIO_new_mem_buf(cert_pem.data(), static_cast<int>(cert_pem.size()));
  X509* cert = PEM_read_bio_X509(cert_bio, nullptr, nullptr, nullptr);
  BIO_free(cert_bio);
  if (!cert) {
    EVP_PKEY_free(key);
    crypto_fail("bad certificate PEM");
  }
  if (X509_check_private_key(cert, key) != 1) {
    EVP_PKEY_free(key);
    X509_free(cert);
    crypto_fail("certificate public key does not match the private key");
  }
  return SigningIdentity(key, cert);
}

SigningIdentity load_keystore(const std::string& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file_text(path));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::CryptoFailure, "keystore " + path + ": " + e.what());
  }
  if (doc.contains("key_pem") && doc.contains("cert_pem")) {
    return identity_from_pem(doc["key_pem"].get<std::string>(),
                             doc["cert_pem"].get<std::string>());
  }
  if (doc.contains("seed")) {
    return generate_identity(doc["seed"].get<uint64_t>());
  }
  fail(ErrorKind::CryptoFailure, "keystore " + path + " has neither PEMs nor a seed");
}

void save_keystore(const std::string& path, const SigningIdentity& identity) {
  nlohmann::json doc;
  doc["key_pem"] = identity.key_pem();
  doc["cert_pem"] = identity.cert_pem();
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::CryptoFailure, "cannot write keystore " + path);
  out << doc.dump(2) << "\n";
}

Bytes sign_apk(BytesView apk_bytes, const SigningIdentity& identity) {
  Archive archive = unpack(apk_bytes);

  Archive content;
  for (const ArchiveEntry& entry : archive.entries) {
    if (!is_signature_entry(entry.path)) content.entries.push_back(entry);
  }
  std::sort(content.entries.begin(), content.entries.end(),
            [](const ArchiveEntry& a, const ArchiveEntry& b) { return a.path < b.path; });

  std::string manifest = "Manifest-Version: 1.0\r\nCreated-By: dexweaver\r\n\r\n";
  std::map<std::string, std::string> sections;
  for (const ArchiveEntry& entry : content.entries) {
    std::string section = manifest_section(entry.path, sha256_base64(entry.bytes));
    sections[entry.path] = section;
    manifest += section;
  }

  std::string signature_file = "Signature-Version: 1.0\r\nCreated-By: dexweaver\r\n";
  signature_file += std::string(kDigestAttr) + "-Manifest: " + sha256_base64(manifest) +
                    "\r\n\r\n";
  for (const ArchiveEntry& entry : content.entries) {
    signature_file += manifest_section(entry.path, sha256_base64(sections[entry.path]));
  }

  BIO* data_bio = BIO_new_mem_buf(signature_file.data(),
                                  static_cast<int>(signature_file.size()));
  PKCS7* p7 = PKCS7_sign(identity.cert(), identity.key(), nullptr, data_bio,
                         PKCS7_DETACHED | PKCS7_BINARY | PKCS7_NOATTR);
  BIO_free(data_bio);
  if (!p7) crypto_fail("PKCS7_sign");
  unsigned char* der = nullptr;
  int der_len = i2d_PKCS7(p7, &der);
  PKCS7_free(p7);
  if (der_len < 0) crypto_fail("i2d_PKCS7");
  Bytes signature_block(der, der + der_len);
  OPENSSL_free(der);

  Archive signed_archive = content;
  auto text_bytes = [](const std::string& s) {
    return Bytes(s.begin(), s.end());
  };
  signed_archive.entries.push_back({kManifestName, text_bytes(manifest)});
  signed_archive.entries.push_back({kSignatureFileName, text_bytes(signature_file)});
  signed_archive.entries.push_back({kSignatureBlockName, signature_block});
  return write_zip(signed_archive);
}

const char* verify_status_name(VerifyResult::Status status) {
  switch (status) {
    case VerifyResult::Status::Verified: return "Verified";
    case VerifyResult::Status::DigestMismatch: return "DigestMismatch";
    case VerifyResult::Status::UntrustedSigner: return "UntrustedSigner";
    case VerifyResult::Status::Unsigned: return "Unsigned";
  }
  return "Unsigned";
}

VerifyResult verify_apk(BytesView apk_bytes, const X509* trust) {
  // Lenient container read: the digest chain, not the zip CRC, decides.
  Archive archive;
  try {
    archive = unpack(apk_bytes, /*verify_crc=*/false);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::BadZip) {
      return {VerifyResult::Status::DigestMismatch, e.what()};
    }
    throw;
  }
  const ArchiveEntry* manifest_entry = archive.find(kManifestName);
  const ArchiveEntry* sf_entry = archive.find(kSignatureFileName);
  const ArchiveEntry* block_entry = archive.find(kSignatureBlockName);
  if (!manifest_entry || !sf_entry || !block_entry) {
    return {VerifyResult::Status::Unsigned, "missing signature entries"};
  }

  std::string manifest(manifest_entry->bytes.begin(), manifest_entry->bytes.end());
  ParsedManifest parsed = parse_manifest(manifest);

  // Every content entry must be listed with a matching digest, and nothing
  // may be listed that is absent.
  for (const ArchiveEntry& entry : archive.entries) {
    if (is_signature_entry(entry.path)) continue;
    auto it = parsed.digests.find(entry.path);
    if (it == parsed.digests.end()) {
      return {VerifyResult::Status::DigestMismatch, entry.path + " not covered by manifest"};
    }
    if (sha256_base64(entry.bytes) != it->second) {
      return {VerifyResult::Status::DigestMismatch, entry.path};
    }
  }
  for (const auto& [path, digest] : parsed.digests) {
    if (!archive.find(path)) {
      return {VerifyResult::Status::DigestMismatch, path + " listed but missing"};
    }
  }

  // The signature file must digest the manifest we just checked.
  std::string signature_file(sf_entry->bytes.begin(), sf_entry->bytes.end());
  std::string manifest_digest;
  {
    std::istringstream lines(signature_file);
    std::string line;
    std::string prefix = std::string(kDigestAttr) + "-Manifest: ";
    while (std::getline(lines, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.rfind(prefix, 0) == 0) {
        manifest_digest = line.substr(prefix.size());
        break;
      }
    }
  }
  if (manifest_digest != sha256_base64(manifest)) {
    return {VerifyResult::Status::DigestMismatch, kManifestName};
  }

  const unsigned char* der = block_entry->bytes.data();
  PKCS7* p7 = d2i_PKCS7(nullptr, &der, static_cast<long>(block_entry->bytes.size()));
  if (!p7) return {VerifyResult::Status::DigestMismatch, kSignatureBlockName};

  STACK_OF(X509)* signers = PKCS7_get0_signers(p7, nullptr, 0);
  if (!signers || sk_X509_num(signers) < 1) {
    if (signers) sk_X509_free(signers);
    PKCS7_free(p7);
    return {VerifyResult::Status::DigestMismatch, "no signer certificate embedded"};
  }
  X509* signer = sk_X509_value(signers, 0);
  if (trust) {
    if (X509_cmp(signer, trust) != 0) {
      sk_X509_free(signers);
      PKCS7_free(p7);
      return {VerifyResult::Status::UntrustedSigner,
              "embedded certificate differs from the trusted one"};
    }
  }
  sk_X509_free(signers);

  BIO* data_bio = BIO_new_mem_buf(sf_entry->bytes.data(),
                                  static_cast<int>(sf_entry->bytes.size()));
  int ok = PKCS7_verify(p7, nullptr, nullptr, data_bio, nullptr,
                        PKCS7_NOVERIFY | PKCS7_BINARY);
  BIO_free(data_bio);
  PKCS7_free(p7);
  if (ok != 1) return {VerifyResult::Status::DigestMismatch, kSignatureFileName};
  return {VerifyResult::Status::Verified, ""};
}

}  // namespace dexweaver
