#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rarefind/classifier.hpp"
#include "rarefind/common.hpp"
#include "rarefind/data.hpp"

namespace rarefind {

// Orthonormal rows spanning the top-k principal directions of an
// UNcentered data matrix (no mean subtraction).
struct Projection {
    Matrix basis;  // k x d
    std::size_t k = 0;

    std::vector<double> project(std::span<const double> x) const;
};

// Rows of the result are the top-k right singular vectors of `features`,
// ordered by singular value descending, computed by eigendecomposition of
// the d x d Gram matrix A^T A. Sign convention: each row's
// largest-magnitude entry is positive.
Projection uncentered_pca(const Matrix& features, std::size_t k);

// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
// Returns eigenvalues descending; `vectors` rows are the matching
// eigenvectors.
void symmetric_eigen(const Matrix& sym, std::vector<double>& values,
                     Matrix& vectors);

struct DissectRow {
    std::uint64_t id = 0;
    std::string split;
    int label = 0;
    std::vector<double> coords;
};

// Feature-space dissection: fit the projection on the embedded TRAINING
// samples of the rare class only, then project every validation sample.
// Rows come back sorted by first coordinate descending.
std::vector<DissectRow> dissect_report(const Classifier& clf,
                                       const SplitBundle& bundle,
                                       int rare_class, std::size_t k = 2);

// CSV: `id,split,class,c0,...,c{k-1}`.
void write_dissect_csv(const std::string& path,
                       const std::vector<DissectRow>& rows);

}  // namespace rarefind
