#include "flat/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "flat/error.hpp"

namespace flat {

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(trim(std::string_view(line).substr(start, comma - start)));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

struct Table {
    std::string path;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<int> line_numbers;
};

Table read_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    Table t;
    t.path = path;
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (trim(line).empty()) continue;
        auto cells = split(line);
        if (t.header.empty()) {
            t.header = std::move(cells);
            continue;
        }
        if (cells.size() != t.header.size())
            throw ValidationError(path + ":" + std::to_string(number) + ": expected " +
                                  std::to_string(t.header.size()) + " fields, found " +
                                  std::to_string(cells.size()));
        t.rows.push_back(std::move(cells));
        t.line_numbers.push_back(number);
    }
    if (t.header.empty()) throw ValidationError(path + ": missing header");
    if (t.rows.empty()) throw ValidationError(path + ": no data rows");
    return t;
}

double parse_double(const Table& t, std::size_t row, std::size_t col) {
    const std::string& cell = t.rows[row][col];
    const std::string where = t.path + ":" + std::to_string(t.line_numbers[row]) + ": column '" +
                              t.header[col] + "'";
    double value = 0.0;
    const char* end = cell.data() + cell.size();
    auto [ptr, ec] = std::from_chars(cell.data(), end, value);
    if (cell.empty() || ec != std::errc() || ptr != end) {
        std::string lower(cell);
        std::transform(lower.begin(), lower.end(), lower.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        if (lower == "nan" || lower == "inf" || lower == "-inf" || lower == "infinity")
            throw NonFiniteError(where + ": non-finite value '" + cell + "'");
        throw ValidationError(where + ": not a number: '" + cell + "'");
    }
    if (!std::isfinite(value)) throw NonFiniteError(where + ": non-finite value '" + cell + "'");
    return value;
}

long long parse_integer(const Table& t, std::size_t row, std::size_t col) {
    const std::string& cell = t.rows[row][col];
    long long value = 0;
    const char* end = cell.data() + cell.size();
    auto [ptr, ec] = std::from_chars(cell.data(), end, value);
    if (cell.empty() || ec != std::errc() || ptr != end)
        throw ValidationError(t.path + ":" + std::to_string(t.line_numbers[row]) + ": column '" +
                              t.header[col] + "' is not an integer: '" + cell + "'");
    return value;
}

// Row order sorted by id; ids must be exactly 0..n-1.
std::vector<std::size_t> order_by_id(const Table& t) {
    if (t.header.front() != "id") throw ValidationError(t.path + ": first column must be 'id'");
    const std::size_t n = t.rows.size();
    std::vector<std::size_t> order(n, n);
    for (std::size_t r = 0; r < n; ++r) {
        const long long id = parse_integer(t, r, 0);
        if (id < 0 || id >= static_cast<long long>(n))
            throw ValidationError(t.path + ":" + std::to_string(t.line_numbers[r]) + ": id " +
                                  std::to_string(id) + " outside 0.." + std::to_string(n - 1));
        if (order[id] != n)
            throw ValidationError(t.path + ":" + std::to_string(t.line_numbers[r]) +
                                  ": duplicate id " + std::to_string(id));
        order[id] = r;
    }
    return order;
}

// Number of x1, x2[, x3] columns following the id.
std::size_t coordinate_columns(const Table& t) {
    std::size_t dims = 0;
    while (dims < 3 && dims + 1 < t.header.size() &&
           t.header[dims + 1] == "x" + std::to_string(dims + 1))
        ++dims;
    if (dims < 2) throw ValidationError(t.path + ": expected coordinate columns x1,x2[,x3] after id");
    return dims;
}

Eigen::MatrixXd read_block(const Table& t, const std::vector<std::size_t>& order,
                           std::size_t first, std::size_t count) {
    Eigen::MatrixXd out(static_cast<Index>(order.size()), static_cast<Index>(count));
    for (std::size_t i = 0; i < order.size(); ++i)
        for (std::size_t c = 0; c < count; ++c)
            out(static_cast<Index>(i), static_cast<Index>(c)) = parse_double(t, order[i], first + c);
    return out;
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    return out;
}

void finish(std::ofstream& out, const std::string& path) {
    out.flush();
    if (!out) throw IoError("write failed: " + path);
}

std::string coordinate_header(Index dims) {
    std::string h = "id";
    for (Index d = 0; d < dims; ++d) h += ",x" + std::to_string(d + 1);
    return h;
}

void write_coordinates(std::ostream& out, const Eigen::MatrixXd& coords, Index i) {
    out << i;
    for (Index d = 0; d < coords.cols(); ++d) out << ',' << format_double(coords(i, d));
}

}  // namespace

std::string format_double(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, ptr);
}

SpatialDataset read_dataset_csv(const std::string& path) {
    const Table t = read_table(path);
    const auto order = order_by_id(t);
    const std::size_t dims = coordinate_columns(t);
    const std::size_t cols = t.header.size();
    if (cols < dims + 3)
        throw ValidationError(path + ": need at least one covariate column and a response column");
    const std::size_t p = cols - dims - 2;

    SpatialDataset ds;
    ds.coords = read_block(t, order, 1, dims);
    ds.covariates = read_block(t, order, 1 + dims, p);
    ds.response = read_block(t, order, cols - 1, 1).col(0);
    ds.covariate_names.assign(t.header.begin() + 1 + dims, t.header.end() - 1);
    ds.validate();
    return ds;
}

void write_dataset_csv(const SpatialDataset& ds, const std::string& path) {
    auto out = open_output(path);
    out << coordinate_header(ds.dim());
    for (const auto& name : ds.covariate_names) out << ',' << name;
    out << ",response\n";
    for (Index i = 0; i < ds.n(); ++i) {
        write_coordinates(out, ds.coords, i);
        for (Index k = 0; k < ds.p(); ++k) out << ',' << format_double(ds.covariates(i, k));
        out << ',' << format_double(ds.response[i]) << '\n';
    }
    finish(out, path);
}

FieldTable read_field_csv(const std::string& path) {
    const Table t = read_table(path);
    const auto order = order_by_id(t);
    const std::size_t dims = coordinate_columns(t);

    std::vector<std::size_t> beta_cols, region_cols;
    for (std::size_t c = dims + 1; c < t.header.size(); ++c) {
        if (t.header[c].rfind("beta_", 0) == 0)
            beta_cols.push_back(c);
        else if (t.header[c].rfind("region_", 0) == 0)
            region_cols.push_back(c);
        else
            throw ValidationError(path + ": unexpected column '" + t.header[c] + "'");
    }
    if (beta_cols.empty()) throw ValidationError(path + ": no beta_k columns");
    if (!region_cols.empty() && region_cols.size() != beta_cols.size())
        throw DimensionError(path + ": region_k columns must match beta_k columns");

    FieldTable out;
    out.coords = read_block(t, order, 1, dims);
    const Index n = static_cast<Index>(order.size());
    out.field.beta.resize(n, static_cast<Index>(beta_cols.size()));
    for (std::size_t k = 0; k < beta_cols.size(); ++k) {
        out.field.covariate_names.push_back(t.header[beta_cols[k]]);
        for (Index i = 0; i < n; ++i)
            out.field.beta(i, static_cast<Index>(k)) = parse_double(t, order[i], beta_cols[k]);
    }
    for (std::size_t c : region_cols) {
        std::vector<int> labels(n);
        for (Index i = 0; i < n; ++i) labels[i] = static_cast<int>(parse_integer(t, order[i], c));
        out.regions.push_back(std::move(labels));
    }
    return out;
}

void write_field_csv(const FieldTable& table, const std::string& path) {
    const Index n = table.field.n();
    const Index p = table.field.p();
    if (table.coords.rows() != n) throw DimensionError("coordinates do not match field rows");
    if (!table.regions.empty() && static_cast<Index>(table.regions.size()) != p)
        throw DimensionError("region columns do not match field columns");
    auto out = open_output(path);
    out << coordinate_header(table.coords.cols());
    for (Index k = 0; k < p; ++k) out << ",beta_" << k + 1;
    for (std::size_t k = 0; k < table.regions.size(); ++k) out << ",region_" << k + 1;
    out << '\n';
    for (Index i = 0; i < n; ++i) {
        write_coordinates(out, table.coords, i);
        for (Index k = 0; k < p; ++k) out << ',' << format_double(table.field.beta(i, k));
        for (const auto& r : table.regions) out << ',' << r[i];
        out << '\n';
    }
    finish(out, path);
}

void write_labels_csv(const std::vector<std::vector<int>>& columns,
                      const std::vector<std::string>& names, const std::string& path) {
    if (columns.empty() || columns.size() != names.size())
        throw DimensionError("label columns and names differ");
    const std::size_t n = columns.front().size();
    for (const auto& c : columns)
        if (c.size() != n) throw DimensionError("label columns differ in length");
    auto out = open_output(path);
    out << "id";
    for (const auto& name : names) out << ',' << name;
    out << '\n';
    for (std::size_t i = 0; i < n; ++i) {
        out << i;
        for (const auto& c : columns) out << ',' << c[i];
        out << '\n';
    }
    finish(out, path);
}

void write_sdq_csv(const Eigen::MatrixXd& coords, const SdqField& sdq, const std::string& path) {
    if (coords.rows() != sdq.values.size()) throw DimensionError("coordinates do not match field");
    auto out = open_output(path);
    out << coordinate_header(coords.cols()) << ",sdq\n";
    for (Index i = 0; i < coords.rows(); ++i) {
        write_coordinates(out, coords, i);
        out << ',' << format_double(sdq.values[i]) << '\n';
    }
    finish(out, path);
}

std::string metric_table_csv(const MetricTable& table) {
    std::ostringstream out;
    out << "measure,coordinate,method,value\n";
    for (const auto& e : table.entries)
        out << e.measure << ',' << e.coordinate << ',' << e.method << ',' << format_double(e.value)
            << '\n';
    return out.str();
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string hex64(std::uint64_t value) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i, value >>= 4) out[i] = digits[value & 0xf];
    return out;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    auto out = open_output(path);
    out << content;
    finish(out, path);
}

}  // namespace flat
