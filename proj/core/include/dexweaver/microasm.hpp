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

#include <string>

#include "dexweaver/dex_model.hpp"

namespace dexweaver {

// Textual assembler for the supported instruction subset, a strict subset of
// smali notation plus two try/catch directives:
//
//   .class public Lcom/app/Main;
//   .super Ljava/lang/Object;
//   .method public static main()I
//       .registers 2
//       invoke-static {}, Lapi/Gps;->getLocation()I
//       move-result v0
//   L0:
//       return v0
//       .try start_label end_label catch Ljava/io/IOException; handler_label
//       .catchall start_label end_label handler_label
//   .end method
//
// Registers are written v0..v255 only; labels are identifiers defined as
// "name:" on their own line. The resulting model has sorted pools and fresh
// label-to-offset resolution.
DexFile assemble(const std::string& source);

// Inverse of assemble for subset-only models: emits deterministic source
// with labels named L0, L1, ... in address order. A body containing opaque
// units fails with OpaqueRegion.
std::string disassemble(const DexFile& dex);

}  // namespace dexweaver
