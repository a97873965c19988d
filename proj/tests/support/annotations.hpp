#pragma once

#include <string>
#include <vector>

#include "transaudit/judge.hpp"

namespace testing {

/// Categories that map onto A+M, F and O respectively.
inline const char* const kBucketCategory[3] = {"accuracy/mistranslation", "fluency/grammar", "terminology/wrong term"};

/// Annotation whose spans realise `mask` (see oracle::vote); negative masks abstain.
inline transaudit::ItemAnnotation annotation_from_mask(const transaudit::ItemKey& key, const std::string& annotator,
                                                       int mask) {
  transaudit::ItemAnnotation a;
  a.key = key;
  a.annotator_id = annotator;
  if (mask < 0) {
    a.parse_status = transaudit::ParseStatus::failed;
    return a;
  }
  for (int b = 0; b < 3; ++b) {
    for (int s = 0; s < 2; ++s) {
      if ((mask >> (2 * b + s)) & 1) {
        a.spans.push_back({"span " + std::to_string(b) + std::to_string(s), kBucketCategory[b],
                           s == 0 ? transaudit::Severity::major : transaudit::Severity::minor});
      }
    }
  }
  return a;
}

}  // namespace testing
