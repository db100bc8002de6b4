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

#pragma once

#include <memory>
#include <optional>
#include <string>

#include "dexweaver/archive.hpp"

typedef struct evp_pkey_st EVP_PKEY;
typedef struct x509_st X509;

namespace dexweaver {

// RSA-2048 key pair with a self-signed certificate whose public key matches.
class SigningIdentity {
 public:
  SigningIdentity(EVP_PKEY* key, X509* cert);  // takes ownership
  SigningIdentity(SigningIdentity&&) noexcept;
  SigningIdentity& operator=(SigningIdentity&&) noexcept;
  ~SigningIdentity();

  EVP_PKEY* key() const { return key_; }
  X509* cert() const { return cert_; }

  std::string key_pem() const;
  std::string cert_pem() const;
  Bytes cert_der() const;

 private:
  EVP_PKEY* key_;
  X509* cert_;
};

// Fresh identity; a seed makes key generation reproducible (same seed, same
// key pair and certificate).
SigningIdentity generate_identity(std::optional<uint64_t> seed = std::nullopt);

SigningIdentity identity_from_pem(const std::string& key_pem, const std::string& cert_pem);

// Keystore file: {"seed": 7} or {"key_pem": "...", "cert_pem": "..."}.
SigningIdentity load_keystore(const std::string& path);
void save_keystore(const std::string& path, const SigningIdentity& identity);

// v1 (JAR) signing: META-INF/MANIFEST.MF lists a SHA-256 digest per entry,
// META-INF/CERT.SF digests the manifest and its sections, META-INF/CERT.RSA
// is a detached PKCS#7 signature over CERT.SF with the certificate embedded.
Bytes sign_apk(BytesView apk_bytes, const SigningIdentity& identity);

struct VerifyResult {
  enum class Status { Verified, DigestMismatch, UntrustedSigner, Unsigned };
  Status status = Status::Unsigned;
  std::string detail;  // tampered entry name or failure note

  bool verified() const { return status == Status::Verified; }
};

const char* verify_status_name(VerifyResult::Status status);

// Verified iff every entry digest matches the manifest, the manifest digest
// matches the signature file, and the PKCS#7 signature validates against the
// embedded certificate (which must equal `trust` when one is supplied).
VerifyResult verify_apk(BytesView apk_bytes, const X509* trust = nullptr);

}  // namespace dexweaver
