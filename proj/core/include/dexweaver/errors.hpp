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

#include <stdexcept>
#include <string>

namespace dexweaver {

// Every failure the toolchain can report, as a stable name. Stage outcomes
// in bench records and CLI diagnostics use Error::name() verbatim.
enum class ErrorKind {
  TruncatedFile,
  BadMagic,
  DigestMismatch,
  MalformedIndex,
  BudgetExceeded,
  RegisterPressure,
  LayoutOverflow,
  UnsupportedRegion,
  SyntaxError,
  UnknownOpcode,
  UndefinedLabel,
  DuplicateLabel,
  OpaqueRegion,
  BadZip,
  MissingClassesDex,
  EntryTooLarge,
  CryptoFailure,
  DegenerateSamples,
  UnknownEntry,
  ArityMismatch,
  UnsupportedOpcode,
};

const char* error_kind_name(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(error_kind_name(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const { return kind_; }
  const char* name() const { return error_kind_name(kind_); }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace dexweaver
