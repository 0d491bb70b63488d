#include "latticespin/csv.hpp"

#include "latticespin/errors.hpp"
#include "latticespin/format.hpp"

#include <fstream>
#include <system_error>

namespace latticespin {

std::string csv_escape(std::string_view field) {
    if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

CsvBuilder::CsvBuilder(std::vector<std::string> header, std::string_view comment) : columns_(header.size()) {
    if (!comment.empty()) {
        if (comment.find('\n') != std::string_view::npos) throw UsageError("csv comment must be one line");
        out_ += "# ";
        out_ += comment;
        out_ += '\n';
    }
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (j) out_ += ',';
        out_ += csv_escape(header[j]);
    }
    out_ += '\n';
}

void CsvBuilder::row(const std::vector<CsvField>& fields) {
    if (fields.size() != columns_) throw UsageError("csv row has wrong number of fields");
    for (std::size_t j = 0; j < fields.size(); ++j) {
        if (j) out_ += ',';
        const auto& f = fields[j];
        if (const auto* d = std::get_if<double>(&f)) out_ += fmt17(*d);
        else if (const auto* i = std::get_if<std::int64_t>(&f)) out_ += std::to_string(*i);
        else out_ += csv_escape(std::get<std::string>(f));
    }
    out_ += '\n';
    ++rows_;
}

void CsvBuilder::row(std::span<const double> values) {
    if (values.size() != columns_) throw UsageError("csv row has wrong number of fields");
    for (std::size_t j = 0; j < values.size(); ++j) {
        if (j) out_ += ',';
        out_ += fmt17(values[j]);
    }
    out_ += '\n';
    ++rows_;
}

void write_atomic(const std::filesystem::path& path, std::string_view content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw Error("cannot open " + tmp.string() + " for writing");
        os.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!os) throw Error("write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

} // namespace latticespin
