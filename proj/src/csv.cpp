#include "ai4ef/csv.hpp"

#include "ai4ef/error.hpp"

namespace ai4ef::csv {

namespace {

[[noreturn]] void malformed(std::size_t line, const std::string& what) {
  throw Error(ErrorCode::MalformedCsv, "line " + std::to_string(line) + ": " + what, std::to_string(line));
}

}  // namespace

Document parse(std::string_view text) {
  if (text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);

  std::vector<std::pair<Record, std::size_t>> records;
  Record record;
  std::string field;
  bool in_quotes = false;
  bool field_was_quoted = false;
  std::size_t line = 1;
  std::size_t record_line = 1;

  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_was_quoted = false;
  };
  auto end_record = [&] {
    end_field();
    // Blank lines carry no record.
    if (!(record.size() == 1 && record.front().empty())) records.emplace_back(std::move(record), record_line);
    record.clear();
    record_line = line;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty() || field_was_quoted) malformed(line, "unexpected quote");
        in_quotes = true;
        field_was_quoted = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
        ++line;
        end_record();
        break;
      case '\n':
        ++line;
        end_record();
        break;
      default:
        if (field_was_quoted) malformed(line, "text after closing quote");
        field.push_back(c);
    }
  }
  if (in_quotes) malformed(record_line, "unterminated quoted field");
  if (!field.empty() || field_was_quoted || !record.empty()) end_record();

  Document doc;
  if (records.empty()) return doc;
  doc.header = std::move(records.front().first);
  for (std::size_t r = 1; r < records.size(); ++r) {
    auto& [row, row_line] = records[r];
    if (row.size() != doc.header.size()) {
      malformed(row_line, "expected " + std::to_string(doc.header.size()) + " fields, found " +
                              std::to_string(row.size()));
    }
    doc.rows.push_back(std::move(row));
  }
  return doc;
}

std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (const char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string format_record(const Record& record) {
  std::string out;
  for (std::size_t i = 0; i < record.size(); ++i) {
    if (i) out.push_back(',');
    out += escape(record[i]);
  }
  return out;
}

std::string format(const Document& document) {
  std::string out = format_record(document.header) + "\r\n";
  for (const auto& row : document.rows) out += format_record(row) + "\r\n";
  return out;
}

}  // namespace ai4ef::csv
