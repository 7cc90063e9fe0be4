#pragma once

// Golden-file comparison. Set CANONCORR_UPDATE_GOLDEN=1 to rewrite the files
// after an intended output change.

#include "doctest.h"
#include "golden_io.hpp"

#include <cstdlib>
#include <fstream>
#include <string>

namespace canoncorr::testing {

inline void check_golden(const std::string& name, const std::string& actual) {
  const std::string path = golden_path(name);
  if (const char* u = std::getenv("CANONCORR_UPDATE_GOLDEN"); u && *u == '1') {
    std::ofstream(path, std::ios::binary) << actual;
    MESSAGE("rewrote " << path);
    return;
  }
  const auto expected = read_golden(name);
  REQUIRE_MESSAGE(expected.has_value(), "missing golden file " << path);
  CHECK_MESSAGE(*expected == actual, "output differs from " << path);
}

}  // namespace canoncorr::testing
