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

#include "dexweaver/policy.hpp"

#include <fstream>
#include <sstream>

#include "dexweaver/errors.hpp"
#include "json.hpp"

namespace dexweaver {

namespace {

std::string read_file_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::SyntaxError, "cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

bool valid_permission_name(const std::string& name) {
  if (name.empty()) return false;
  for (char c : name) {
    if (!(c >= 'A' && c <= 'Z') && c != '_' && !(c >= '0' && c <= '9')) return false;
  }
  return true;
}

}  // namespace

std::set<std::string> PermissionMap::keys() const {
  std::set<std::string> out;
  for (const auto& [signature, perms] : entries) out.insert(signature);
  return out;
}

const std::set<std::string>& Policy::grants_for(const std::string& app) const {
  static const std::set<std::string> empty;
  auto it = per_app.find(app);
  return it == per_app.end() ? empty : it->second;
}

std::set<std::string> methods_for_permissions(const PermissionMap& map,
                                              const std::set<std::string>& grants) {
  std::set<std::string> out;
  for (const auto& [signature, perms] : map.entries) {
    for (const std::string& perm : perms) {
      if (grants.count(perm)) {
        out.insert(signature);
        break;
      }
    }
  }
  return out;
}

Decision policy_accepts(const Policy& policy, const PermissionMap& map,
                        const std::string& app, const std::string& method) {
  auto it = map.entries.find(method);
  if (it == map.entries.end()) return Decision{true, "unmapped"};
  const std::set<std::string>& grants = policy.grants_for(app);
  for (const std::string& perm : it->second) {
    if (!grants.count(perm)) return Decision{false, "no-grant"};
  }
  // All required permissions are granted; name the first one.
  return Decision{true, *it->second.begin()};
}

PermissionMap parse_permission_map(const std::string& json_text) {
  PermissionMap map;
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::SyntaxError, std::string("permission map: ") + e.what());
  }
  if (!doc.is_object()) fail(ErrorKind::SyntaxError, "permission map must be an object");
  for (auto& [signature, perms] : doc.items()) {
    if (!perms.is_array() || perms.empty()) {
      fail(ErrorKind::SyntaxError, "permissions for " + signature + " must be a non-empty array");
    }
    std::set<std::string> set;
    for (const auto& perm : perms) {
      if (!perm.is_string() || !valid_permission_name(perm.get<std::string>())) {
        fail(ErrorKind::SyntaxError, "bad permission name for " + signature);
      }
      set.insert(perm.get<std::string>());
    }
    map.entries[signature] = std::move(set);
  }
  return map;
}

Policy parse_policy(const std::string& json_text) {
  Policy policy;
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::SyntaxError, std::string("policy: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("apps") || !doc["apps"].is_object()) {
    fail(ErrorKind::SyntaxError, "policy must be an object with an \"apps\" object");
  }
  for (auto& [app, perms] : doc["apps"].items()) {
    if (!perms.is_array()) fail(ErrorKind::SyntaxError, "grants for " + app + " must be an array");
    std::set<std::string> set;
    for (const auto& perm : perms) {
      if (!perm.is_string() || !valid_permission_name(perm.get<std::string>())) {
        fail(ErrorKind::SyntaxError, "bad permission name for " + app);
      }
      set.insert(perm.get<std::string>());
    }
    policy.per_app[app] = std::move(set);
  }
  return policy;
}

PermissionMap load_permission_map(const std::string& path) {
  return parse_permission_map(read_file_text(path));
}

Policy load_policy(const std::string& path) {
  return parse_policy(read_file_text(path));
}

}  // namespace dexweaver
