#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace latefusion::csv {

/// Splits one CSV record. Double-quoted fields may contain commas and "" escapes.
/// A trailing '\r' is stripped.
std::vector<std::string> split(std::string_view line);

/// Quotes a field only when it contains a comma, quote or newline.
std::string escape(std::string_view field);

/// Shortest text that parses back to the identical double.
std::string format_exact(double value);

/// Fixed 6-significant-digit text used for reports and plots.
std::string format_g6(double value);

/// Parses a full-string double; returns false for non-numeric text.
bool parse_double(std::string_view text, double& out);

/// Writes the schema header line shared by every emitted CSV.
void write_version_line(std::ostream& out, std::string_view kind);

inline constexpr std::string_view kVersionPrefix = "# latefusion-csv v1";

class Writer {
public:
    explicit Writer(std::ostream& out) : out_(out) {}
    void row(const std::vector<std::string>& fields);

private:
    std::ostream& out_;
};

/// Reads all data records, skipping leading '#' comment lines. The first
/// returned record is the header.
std::vector<std::vector<std::string>> read_records(std::istream& in);

}  // namespace latefusion::csv
