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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <openssl/evp.h>
#include <openssl/x509.h>

#include <cstdio>

#include "dexweaver/dex_io.hpp"
#include "dexweaver/signing.hpp"
#include "test_util.hpp"

using namespace dexweaver;
using namespace dexweaver::testutil;

namespace {

Bytes demo_apk() {
  Archive archive;
  std::string manifest = "<manifest package=\"demo\"/>";
  archive.entries.push_back({"AndroidManifest.xml", Bytes(manifest.begin(), manifest.end())});
  // Below the deflate threshold, so the payload is stored and byte-addressable.
  Bytes asset(800, 0x5a);
  archive.entries.push_back({"assets/pad.bin", asset});
  return repack(archive, write_dex(load_fixture("gps.mdsm")));
}

}  // namespace

TEST_CASE("sign then verify succeeds") {
  SigningIdentity identity = generate_identity(7);
  Bytes signed_apk = sign_apk(demo_apk(), identity);
  VerifyResult result = verify_apk(signed_apk);
  CHECK(result.status == VerifyResult::Status::Verified);

  Archive archive = unpack(signed_apk);
  CHECK(archive.find("META-INF/MANIFEST.MF") != nullptr);
  CHECK(archive.find("META-INF/CERT.SF") != nullptr);
  CHECK(archive.find("META-INF/CERT.RSA") != nullptr);
}

TEST_CASE("verify with the matching trust certificate succeeds") {
  SigningIdentity identity = generate_identity(7);
  Bytes signed_apk = sign_apk(demo_apk(), identity);
  CHECK(verify_apk(signed_apk, identity.cert()).status == VerifyResult::Status::Verified);
}

TEST_CASE("a flipped payload byte yields DigestMismatch naming the entry") {
  SigningIdentity identity = generate_identity(7);
  Bytes signed_apk = sign_apk(demo_apk(), identity);
  // assets/pad.bin is stored as a constant run; flip a byte inside it.
  Bytes tampered = signed_apk;
  size_t run_start = 0;
  size_t run_len = 0;
  for (size_t i = 0; i < tampered.size(); i++) {
    if (tampered[i] == 0x5a) {
      if (run_len == 0) run_start = i;
      if (++run_len > 256) break;
    } else {
      run_len = 0;
    }
  }
  REQUIRE(run_len > 256);
  tampered[run_start + 17] ^= 0x01;
  VerifyResult result = verify_apk(tampered);
  CHECK(result.status == VerifyResult::Status::DigestMismatch);
  CHECK(result.detail.find("assets/pad.bin") != std::string::npos);
}

TEST_CASE("verifying against a different identity yields UntrustedSigner") {
  SigningIdentity one = generate_identity(7);
  SigningIdentity two = generate_identity(8);
  Bytes signed_apk = sign_apk(demo_apk(), one);
  VerifyResult result = verify_apk(signed_apk, two.cert());
  CHECK(result.status == VerifyResult::Status::UntrustedSigner);
}

TEST_CASE("an unsigned archive verifies as Unsigned") {
  VerifyResult result = verify_apk(demo_apk());
  CHECK(result.status == VerifyResult::Status::Unsigned);
}

TEST_CASE("seeded identity generation is reproducible") {
  SigningIdentity a = generate_identity(7);
  SigningIdentity b = generate_identity(7);
  CHECK(a.cert_der() == b.cert_der());
  CHECK(a.key_pem() == b.key_pem());
}

TEST_CASE("unseeded identities are fresh") {
  SigningIdentity a = generate_identity();
  SigningIdentity b = generate_identity();
  CHECK(a.cert_der() != b.cert_der());
}

TEST_CASE("the self-signed certificate validates its own signature") {
  SigningIdentity identity = generate_identity(12);
  EVP_PKEY* pub = X509_get0_pubkey(identity.cert());
  CHECK(X509_verify(identity.cert(), pub) == 1);
}

TEST_CASE("keystore PEM round trip") {
  SigningIdentity identity = generate_identity(21);
  std::string path = std::string("/tmp/dexweaver_ks_") + std::to_string(getpid()) + ".json";
  save_keystore(path, identity);
  SigningIdentity loaded = load_keystore(path);
  CHECK(loaded.cert_der() == identity.cert_der());
  Bytes signed_apk = sign_apk(demo_apk(), loaded);
  CHECK(verify_apk(signed_apk, identity.cert()).status == VerifyResult::Status::Verified);
  std::remove(path.c_str());
}

TEST_CASE("re-signing replaces the previous signature") {
  SigningIdentity one = generate_identity(7);
  SigningIdentity two = generate_identity(8);
  Bytes once = sign_apk(demo_apk(), one);
  Bytes twice = sign_apk(once, two);
  CHECK(verify_apk(twice, two.cert()).status == VerifyResult::Status::Verified);
  CHECK(verify_apk(twice, one.cert()).status == VerifyResult::Status::UntrustedSigner);
}

TEST_CASE("signing and repacked archives commute with verification across fixtures") {
  SigningIdentity identity = generate_identity(5);
  for (const std::string& name : fixture_sources()) {
    CAPTURE(name);
    Archive archive;
    std::string manifest = "<manifest/>";
    archive.entries.push_back(
        {"AndroidManifest.xml", Bytes(manifest.begin(), manifest.end())});
    Bytes apk = repack(archive, write_dex(load_fixture(name)));
    CHECK(verify_apk(sign_apk(apk, identity)).status == VerifyResult::Status::Verified);
  }
}
