#include "epf/io/columnar.hpp"

#include <zlib.h>

#include <atomic>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <thread>

#include "epf/error.hpp"

namespace epf::io {

namespace {

constexpr char kMagic[8] = {'E', 'P', 'F', 'C', 'O', 'L', '1', '\0'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint8_t kTypeInt64 = 1;
constexpr std::uint8_t kTypeFloat64 = 2;

template <typename T>
void put_le(std::string& out, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(std::begin(bytes), std::end(bytes));
    }
    out.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

class Reader {
public:
    explicit Reader(std::string_view data) : data_(data) {}

    template <typename T>
    T get() {
        need(sizeof(T));
        unsigned char bytes[sizeof(T)];
        std::memcpy(bytes, data_.data() + pos_, sizeof(T));
        if constexpr (std::endian::native == std::endian::big) {
            std::reverse(std::begin(bytes), std::end(bytes));
        }
        pos_ += sizeof(T);
        T value;
        std::memcpy(&value, bytes, sizeof(T));
        return value;
    }

    std::string_view take(std::size_t n) {
        need(n);
        auto view = data_.substr(pos_, n);
        pos_ += n;
        return view;
    }

private:
    void need(std::size_t n) const {
        if (pos_ + n > data_.size()) throw FormatError("columnar file truncated");
    }

    std::string_view data_;
    std::size_t pos_ = 0;
};

std::filesystem::path temp_sibling(const std::filesystem::path& path) {
    static std::atomic<std::uint64_t> counter{0};
    auto tid = std::hash<std::thread::id>{}(std::this_thread::get_id());
    auto name = path.filename().string() + ".tmp." + std::to_string(tid) + "." +
                std::to_string(counter.fetch_add(1));
    return path.parent_path() / name;
}

}  // namespace

void ColumnarTable::check_length(std::size_t n, std::string_view name) {
    if (has(name)) throw FormatError("duplicate column '" + std::string(name) + "'");
    if (!columns_.empty() && n != rows_) {
        throw FormatError("column '" + std::string(name) + "' has " + std::to_string(n) +
                          " rows, table has " + std::to_string(rows_));
    }
    rows_ = n;
}

void ColumnarTable::add_int64(std::string name, Int64Column values) {
    check_length(values.size(), name);
    columns_.push_back({std::move(name), std::move(values)});
}

void ColumnarTable::add_float64(std::string name, Float64Column values) {
    check_length(values.size(), name);
    columns_.push_back({std::move(name), std::move(values)});
}

bool ColumnarTable::has(std::string_view name) const {
    for (const auto& c : columns_) {
        if (c.name == name) return true;
    }
    return false;
}

const ColumnarTable::Column& ColumnarTable::find(std::string_view name) const {
    for (const auto& c : columns_) {
        if (c.name == name) return c;
    }
    throw FormatError("missing column '" + std::string(name) + "'");
}

const ColumnarTable::Int64Column& ColumnarTable::int64(std::string_view name) const {
    const auto& c = find(name);
    if (const auto* v = std::get_if<Int64Column>(&c.values)) return *v;
    throw FormatError("column '" + std::string(name) + "' is not int64");
}

const ColumnarTable::Float64Column& ColumnarTable::float64(std::string_view name) const {
    const auto& c = find(name);
    if (const auto* v = std::get_if<Float64Column>(&c.values)) return *v;
    throw FormatError("column '" + std::string(name) + "' is not float64");
}

void write_columnar(const std::filesystem::path& path, const ColumnarTable& table) {
    std::string header;
    header.append(kMagic, sizeof(kMagic));
    put_le<std::uint32_t>(header, kVersion);
    put_le<std::uint32_t>(header, static_cast<std::uint32_t>(table.columns().size()));
    put_le<std::uint64_t>(header, table.rows());

    std::string payload;
    payload.reserve(table.rows() * table.columns().size() * 8);
    for (const auto& column : table.columns()) {
        put_le<std::uint16_t>(header, static_cast<std::uint16_t>(column.name.size()));
        header.append(column.name);
        std::visit(
            [&](const auto& values) {
                using T = typename std::decay_t<decltype(values)>::value_type;
                put_le<std::uint8_t>(header, std::is_same_v<T, double> ? kTypeFloat64 : kTypeInt64);
                for (T v : values) put_le<T>(payload, v);
            },
            column.values);
    }

    uLongf bound = compressBound(static_cast<uLong>(payload.size()));
    std::string compressed(bound, '\0');
    if (compress2(reinterpret_cast<Bytef*>(compressed.data()), &bound,
                  reinterpret_cast<const Bytef*>(payload.data()),
                  static_cast<uLong>(payload.size()), Z_BEST_SPEED) != Z_OK) {
        throw FormatError("zlib compression failed for " + path.string());
    }
    compressed.resize(bound);
    put_le<std::uint64_t>(header, payload.size());
    put_le<std::uint64_t>(header, compressed.size());
    header += compressed;
    write_text_atomic(path, header);
}

ColumnarTable read_columnar(const std::filesystem::path& path) {
    const std::string bytes = read_text(path);
    Reader in(bytes);
    if (in.take(sizeof(kMagic)) != std::string_view(kMagic, sizeof(kMagic))) {
        throw FormatError(path.string() + ": not a columnar file");
    }
    if (auto v = in.get<std::uint32_t>(); v != kVersion) {
        throw FormatError(path.string() + ": unsupported version " + std::to_string(v));
    }
    const auto n_columns = in.get<std::uint32_t>();
    const auto n_rows = in.get<std::uint64_t>();

    std::vector<std::pair<std::string, std::uint8_t>> schema;
    for (std::uint32_t i = 0; i < n_columns; ++i) {
        const auto len = in.get<std::uint16_t>();
        std::string name(in.take(len));
        schema.emplace_back(std::move(name), in.get<std::uint8_t>());
    }
    const auto raw_bytes = in.get<std::uint64_t>();
    const auto compressed_bytes = in.get<std::uint64_t>();
    if (raw_bytes != n_rows * n_columns * 8) throw FormatError(path.string() + ": size mismatch");
    auto compressed = in.take(compressed_bytes);

    std::string payload(raw_bytes, '\0');
    uLongf out_len = static_cast<uLongf>(raw_bytes);
    if (raw_bytes > 0 &&
        uncompress(reinterpret_cast<Bytef*>(payload.data()), &out_len,
                   reinterpret_cast<const Bytef*>(compressed.data()),
                   static_cast<uLong>(compressed.size())) != Z_OK) {
        throw FormatError(path.string() + ": corrupt payload");
    }

    Reader body(payload);
    ColumnarTable table;
    for (auto& [name, type] : schema) {
        if (type == kTypeInt64) {
            ColumnarTable::Int64Column values(n_rows);
            for (auto& v : values) v = body.get<std::int64_t>();
            table.add_int64(std::move(name), std::move(values));
        } else if (type == kTypeFloat64) {
            ColumnarTable::Float64Column values(n_rows);
            for (auto& v : values) v = body.get<double>();
            table.add_float64(std::move(name), std::move(values));
        } else {
            throw FormatError(path.string() + ": unknown column type");
        }
    }
    return table;
}

void write_text_atomic(const std::filesystem::path& path, std::string_view contents) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const auto tmp = temp_sibling(path);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw FormatError("cannot open " + tmp.string() + " for writing");
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) throw FormatError("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace epf::io
