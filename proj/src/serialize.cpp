#include "edip/serialize.hpp"

#include <cstring>
#include <fstream>

namespace edip {

namespace {

void write_bytes(std::ofstream& f, const void* p, size_t n) {
    f.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void read_bytes(std::ifstream& f, void* p, size_t n, const std::string& path) {
    f.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!f) throw IoError("truncated or unreadable file: " + path);
}

template <typename T>
void write_pod(std::ofstream& f, T v) {
    write_bytes(f, &v, sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& f, const std::string& path) {
    T v;
    read_bytes(f, &v, sizeof(T), path);
    return v;
}

}  // namespace

void save_tensor(const std::string& path, const Tensor& t) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f.write("EDIPT", 5);
    write_pod<uint32_t>(f, 1);  // version
    write_pod<uint32_t>(f, static_cast<uint32_t>(t.rank()));
    for (int64_t d : t.shape()) write_pod<uint64_t>(f, static_cast<uint64_t>(d));
    write_bytes(f, t.data().data(), t.data().size() * sizeof(double));
    if (!f) throw IoError("write failed: " + path);
}

Tensor load_tensor(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    char magic[5];
    read_bytes(f, magic, 5, path);
    if (std::memcmp(magic, "EDIPT", 5) != 0) throw IoError("bad tensor magic in " + path);
    uint32_t version = read_pod<uint32_t>(f, path);
    if (version != 1) throw IoError("unsupported tensor version in " + path);
    uint32_t rank = read_pod<uint32_t>(f, path);
    Shape shape(rank);
    for (uint32_t i = 0; i < rank; ++i) shape[i] = static_cast<int64_t>(read_pod<uint64_t>(f, path));
    std::vector<double> data(static_cast<size_t>(numel(shape)));
    read_bytes(f, data.data(), data.size() * sizeof(double), path);
    return Tensor::from_data(std::move(shape), std::move(data));
}

void SparseCsr::matvec(const double* x, double* y) const {
    for (int64_t r = 0; r < rows; ++r) {
        double acc = 0.0;
        for (uint64_t k = row_offsets[r]; k < row_offsets[r + 1]; ++k)
            acc += values[k] * x[col_indices[k]];
        y[r] = acc;
    }
}

SparseCsr SparseCsr::transposed() const {
    SparseCsr t;
    t.rows = cols;
    t.cols = rows;
    t.row_offsets.assign(static_cast<size_t>(cols) + 1, 0);
    for (uint64_t c : col_indices) t.row_offsets[c + 1] += 1;
    for (size_t i = 1; i < t.row_offsets.size(); ++i) t.row_offsets[i] += t.row_offsets[i - 1];
    t.col_indices.resize(col_indices.size());
    t.values.resize(values.size());
    std::vector<uint64_t> cursor(t.row_offsets.begin(), t.row_offsets.end() - 1);
    for (int64_t r = 0; r < rows; ++r)
        for (uint64_t k = row_offsets[r]; k < row_offsets[r + 1]; ++k) {
            uint64_t pos = cursor[col_indices[k]]++;
            t.col_indices[pos] = static_cast<uint64_t>(r);
            t.values[pos] = values[k];
        }
    return t;
}

void save_csr(const std::string& path, const SparseCsr& m) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f.write("EDIPCSR", 7);
    write_pod<uint64_t>(f, static_cast<uint64_t>(m.rows));
    write_pod<uint64_t>(f, static_cast<uint64_t>(m.cols));
    write_pod<uint64_t>(f, static_cast<uint64_t>(m.nnz()));
    write_bytes(f, m.row_offsets.data(), m.row_offsets.size() * sizeof(uint64_t));
    write_bytes(f, m.col_indices.data(), m.col_indices.size() * sizeof(uint64_t));
    write_bytes(f, m.values.data(), m.values.size() * sizeof(double));
    if (!f) throw IoError("write failed: " + path);
}

SparseCsr load_csr(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    char magic[7];
    read_bytes(f, magic, 7, path);
    if (std::memcmp(magic, "EDIPCSR", 7) != 0) throw IoError("bad CSR magic in " + path);
    SparseCsr m;
    m.rows = static_cast<int64_t>(read_pod<uint64_t>(f, path));
    m.cols = static_cast<int64_t>(read_pod<uint64_t>(f, path));
    uint64_t nnz = read_pod<uint64_t>(f, path);
    m.row_offsets.resize(static_cast<size_t>(m.rows) + 1);
    m.col_indices.resize(nnz);
    m.values.resize(nnz);
    read_bytes(f, m.row_offsets.data(), m.row_offsets.size() * sizeof(uint64_t), path);
    read_bytes(f, m.col_indices.data(), nnz * sizeof(uint64_t), path);
    read_bytes(f, m.values.data(), nnz * sizeof(double), path);
    return m;
}

}  // namespace edip
