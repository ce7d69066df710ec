#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace epf::io {

// A small typed column store persisted as one zlib-compressed little-endian
// file. Every artifact the pipeline writes (price caches, prepared datasets,
// checkpoints, forecast dumps) goes through this format.
//
// On-disk layout:
//   "EPFCOL1\0"  u32 version  u32 n_columns  u64 n_rows
//   per column:  u16 name_len  name  u8 type (1 = int64, 2 = float64)
//   u64 raw_bytes  u64 compressed_bytes  zlib(column-major payload)
class ColumnarTable {
public:
    using Int64Column = std::vector<std::int64_t>;
    using Float64Column = std::vector<double>;
    using Values = std::variant<Int64Column, Float64Column>;

    struct Column {
        std::string name;
        Values values;
    };

    void add_int64(std::string name, Int64Column values);
    void add_float64(std::string name, Float64Column values);

    [[nodiscard]] bool has(std::string_view name) const;
    [[nodiscard]] const Int64Column& int64(std::string_view name) const;
    [[nodiscard]] const Float64Column& float64(std::string_view name) const;

    [[nodiscard]] std::size_t rows() const { return rows_; }
    [[nodiscard]] const std::vector<Column>& columns() const { return columns_; }

    friend bool operator==(const ColumnarTable&, const ColumnarTable&) = default;

private:
    void check_length(std::size_t n, std::string_view name);
    const Column& find(std::string_view name) const;

    std::vector<Column> columns_;
    std::size_t rows_ = 0;
};

// Writes to a sibling temporary file and renames it into place, so readers
// never observe a partially written file.
void write_columnar(const std::filesystem::path& path, const ColumnarTable& table);

[[nodiscard]] ColumnarTable read_columnar(const std::filesystem::path& path);

// Atomic text-file write with the same temp+rename discipline.
void write_text_atomic(const std::filesystem::path& path, std::string_view contents);

[[nodiscard]] std::string read_text(const std::filesystem::path& path);

}  // namespace epf::io
