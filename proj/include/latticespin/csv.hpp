#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace latticespin {

using CsvField = std::variant<double, std::int64_t, std::string>;

/// RFC-4180 quoting: fields with comma, quote, CR or LF are quoted and quotes doubled.
std::string csv_escape(std::string_view field);

/// Builds a CSV document with LF line endings and %.17g floats.
class CsvBuilder {
public:
    /// `comment`, when nonempty, is emitted first as a single line "# <comment>".
    explicit CsvBuilder(std::vector<std::string> header, std::string_view comment = {});

    void row(const std::vector<CsvField>& fields);
    void row(std::span<const double> values);

    std::size_t rows() const { return rows_; }
    const std::string& str() const { return out_; }

private:
    std::size_t columns_;
    std::size_t rows_ = 0;
    std::string out_;
};

/// Writes to a sibling temporary file, then renames over `path`.
void write_atomic(const std::filesystem::path& path, std::string_view content);

} // namespace latticespin
