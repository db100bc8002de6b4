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

#include <map>
#include <set>
#include <string>

namespace dexweaver {

// Method signature -> permissions the call requires. Loaded from map.json:
//   { "Lapi/Gps;->getLocation()I": ["GPS"] }
struct PermissionMap {
  std::map<std::string, std::set<std::string>> entries;

  std::set<std::string> keys() const;
};

// Per-application grant sets. Unknown applications have no grants. Loaded
// from policy.json:
//   { "apps": { "news-reader": ["GPS"] } }
struct Policy {
  std::map<std::string, std::set<std::string>> per_app;

  const std::set<std::string>& grants_for(const std::string& app) const;
};

struct Decision {
  bool allowed = false;
  std::string reason;  // granted permission, "unmapped", or "no-grant"
};

// Signatures whose required permissions intersect the grant set.
std::set<std::string> methods_for_permissions(const PermissionMap& map,
                                              const std::set<std::string>& grants);

// A mapped method is allowed iff every permission it requires is granted to
// the application. Unmapped methods are allowed: they are never wrapped, so
// this is the identity path.
Decision policy_accepts(const Policy& policy, const PermissionMap& map,
                        const std::string& app, const std::string& method);

PermissionMap parse_permission_map(const std::string& json_text);
Policy parse_policy(const std::string& json_text);
PermissionMap load_permission_map(const std::string& path);
Policy load_policy(const std::string& path);

}  // namespace dexweaver
