#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "edip/tensor.hpp"

namespace edip {

// Flat binary tensor container: magic "EDIPT", u32 version, u32 rank,
// u64 dims, little-endian f64 payload.
void save_tensor(const std::string& path, const Tensor& t);
Tensor load_tensor(const std::string& path);

struct SparseCsr {
    int64_t rows = 0;
    int64_t cols = 0;
    std::vector<uint64_t> row_offsets;  // rows + 1
    std::vector<uint64_t> col_indices;
    std::vector<double> values;

    int64_t nnz() const { return static_cast<int64_t>(values.size()); }
    // y = M x  (y sized rows)
    void matvec(const double* x, double* y) const;
    SparseCsr transposed() const;
};

// Binary CSR: magic "EDIPCSR", u64 rows/cols/nnz, u64 row offsets,
// u64 column indices, f64 values.
void save_csr(const std::string& path, const SparseCsr& m);
SparseCsr load_csr(const std::string& path);

}  // namespace edip
