#pragma once

#include <cctype>
#include <string>
#include <string_view>

#include "radsprl/corpus.hpp"
#include "radsprl/error.hpp"

namespace fixtures {

inline bool word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

// Next occurrence of needle at or after from that does not sit inside a longer word.
inline std::size_t find_word(std::string_view text, std::string_view needle, std::size_t from) {
  for (std::size_t pos = text.find(needle, from); pos != std::string_view::npos;
       pos = text.find(needle, pos + 1)) {
    const std::size_t end = pos + needle.size();
    const bool left = pos == 0 || !word_char(text[pos - 1]) || !word_char(needle.front());
    const bool right = end == text.size() || !word_char(text[end]) || !word_char(needle.back());
    if (left && right) return pos;
  }
  return std::string_view::npos;
}

// Span over the nth whole-word occurrence of needle in text.
inline radsprl::Span span_of(std::string_view text, std::string_view needle, int nth = 0) {
  std::size_t pos = find_word(text, needle, 0);
  for (int i = 0; i < nth && pos != std::string_view::npos; ++i) pos = find_word(text, needle, pos + 1);
  if (pos == std::string_view::npos) throw radsprl::Error("fixture: missing " + std::string(needle));
  return radsprl::make_span(text, pos, pos + needle.size());
}

inline radsprl::AnnotatedSentence tl_sentence(std::string report, std::string sid, std::string text,
                                              std::string_view traj, std::string_view ind,
                                              std::string_view land) {
  radsprl::AnnotatedSentence s;
  s.report_id = std::move(report);
  s.sentence_id = std::move(sid);
  s.text = std::move(text);
  radsprl::SpatialRelation r;
  r.indicator = span_of(s.text, ind);
  r.trajectors.push_back(span_of(s.text, traj));
  r.landmarks.push_back(span_of(s.text, land));
  s.relations.push_back(r);
  return s;
}

}  // namespace fixtures
