#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "aed/corpus.hpp"
#include "aed/error.hpp"

namespace aed {
namespace {

constexpr const char* kHeader = "onset\toffset\tlabel";

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return fields;
}

bool parse_double(const std::string& text, double& value) {
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  return ec == std::errc() && ptr == last && std::isfinite(value);
}

}  // namespace

std::string format_seconds(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

AnnotationFile parse_annotations(const std::string& text, const ClassInventory& classes) {
  AnnotationFile result;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!saw_header) {
      if (line != kHeader)
        fail(Errc::parse, "line 1: expected header 'onset<TAB>offset<TAB>label'");
      saw_header = true;
      continue;
    }
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (fields.size() != 3) fail(Errc::parse, where + "expected 3 tab-separated fields");
    double onset = 0.0;
    double offset = 0.0;
    if (!parse_double(fields[0], onset)) fail(Errc::parse, where + "onset is not a number");
    if (!parse_double(fields[1], offset)) fail(Errc::parse, where + "offset is not a number");
    if (onset < 0.0) fail(Errc::parse, where + "onset must be >= 0");
    if (offset <= onset) fail(Errc::parse, where + "offset must be greater than onset");
    const int label = classes.find(fields[2]);
    if (label < 0) {
      ++result.dropped;
      continue;
    }
    result.events.push_back({onset, offset, label});
  }
  if (!saw_header) fail(Errc::parse, "line 1: missing header");
  std::stable_sort(result.events.begin(), result.events.end(),
                   [](const EventAnnotation& a, const EventAnnotation& b) {
                     return a.onset < b.onset;
                   });
  return result;
}

AnnotationFile load_annotations(const std::filesystem::path& path,
                                const ClassInventory& classes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io, "cannot open annotation file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    auto result = parse_annotations(buffer.str(), classes);
    if (result.dropped > 0)
      std::cerr << "warning: " << path.string() << ": " << result.dropped
                << " event(s) with non-target labels treated as background\n";
    return result;
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::string format_annotations(const std::vector<EventAnnotation>& events,
                                const ClassInventory& classes) {
  std::string out = std::string(kHeader) + "\n";
  for (const auto& e : events) {
    out += format_seconds(e.onset);
    out += '\t';
    out += format_seconds(e.offset);
    out += '\t';
    out += classes.name(e.label);
    out += '\n';
  }
  return out;
}

void write_annotations(const std::filesystem::path& path,
                       const std::vector<EventAnnotation>& events,
                       const ClassInventory& classes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::io, "cannot write " + path.string());
  out << format_annotations(events, classes);
}

}  // namespace aed
