#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace ai4ef::csv {

using Record = std::vector<std::string>;

struct Document {
  Record header;
  std::vector<Record> rows;
};

/// RFC-4180 parser: quoted fields may contain separators, CR/LF and doubled
/// quotes; CRLF and LF line endings are both accepted; a UTF-8 BOM is skipped.
/// Throws MalformedCsv (field = 1-based line number) on an unterminated quote,
/// stray quote, or a record whose width differs from the header.
Document parse(std::string_view text);

/// Quotes a field only when needed.
std::string escape(std::string_view field);
std::string format_record(const Record& record);
/// Header plus rows, CRLF-terminated as RFC-4180 prescribes.
std::string format(const Document& document);

}  // namespace ai4ef::csv
