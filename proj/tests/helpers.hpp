// Copyright 2026 The Early Cutting Toolkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <filesystem>
#include <functional>
#include <string>

#include <doctest.h>

#include "ec/error.hpp"

namespace testutil {

inline std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::path(EC_TEST_TMP) / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline ec::ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ec::Error& e) {
    return e.kind();
  }
  FAIL("expected an ec::Error");
  return ec::ErrorKind::kContract;
}

}  // namespace testutil
