#include "rarefind/pca.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rarefind/csv.hpp"

namespace rarefind {

std::vector<double> Projection::project(std::span<const double> x) const {
    if (x.size() != basis.cols)
        throw UsageError("project: input has length " + std::to_string(x.size()) +
                         ", basis expects " + std::to_string(basis.cols));
    std::vector<double> out(k, 0.0);
    for (std::size_t r = 0; r < k; ++r)
        for (std::size_t c = 0; c < basis.cols; ++c)
            out[r] += basis(r, c) * x[c];
    return out;
}

void symmetric_eigen(const Matrix& sym, std::vector<double>& values,
                     Matrix& vectors) {
    const std::size_t n = sym.rows;
    if (sym.cols != n) throw UsageError("symmetric_eigen: matrix not square");

    Matrix a = sym;
    Matrix v(n, n);
    for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;

    // Cyclic Jacobi; off-diagonal mass shrinks quadratically, a few dozen
    // sweeps reach machine precision at these sizes.
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0, total = 0.0;
        for (std::size_t p = 0; p < n; ++p) {
            total += a(p, p) * a(p, p);
            for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        }
        if (off <= (total + off) * 1e-28) break;

        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                if (std::abs(a(p, q)) < 1e-300) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) +
                                  std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t i = 0; i < n; ++i) {
                    const double aip = a(i, p), aiq = a(i, q);
                    a(i, p) = c * aip - s * aiq;
                    a(i, q) = s * aip + c * aiq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double api = a(p, i), aqi = a(q, i);
                    a(p, i) = c * api - s * aqi;
                    a(q, i) = s * api + c * aqi;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double vip = v(i, p), viq = v(i, q);
                    v(i, p) = c * vip - s * viq;
                    v(i, q) = s * vip + c * viq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });

    values.resize(n);
    vectors = Matrix(n, n);
    for (std::size_t r = 0; r < n; ++r) {
        values[r] = a(order[r], order[r]);
        for (std::size_t c = 0; c < n; ++c) vectors(r, c) = v(c, order[r]);
    }
}

Projection uncentered_pca(const Matrix& features, std::size_t k) {
    const std::size_t n = features.rows;
    const std::size_t d = features.cols;
    if (n < 1) throw UsageError("uncentered_pca: need at least one row");
    if (k < 1 || k > std::min(n, d))
        throw UsageError("uncentered_pca: k = " + std::to_string(k) +
                         " outside [1, min(n, d) = " +
                         std::to_string(std::min(n, d)) + "]");

    // Gram matrix A^T A; no centering by construction.
    Matrix gram(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i; j < d; ++j) {
            double s = 0.0;
            for (std::size_t r = 0; r < n; ++r)
                s += features(r, i) * features(r, j);
            gram(i, j) = s;
            gram(j, i) = s;
        }

    std::vector<double> values;
    Matrix vectors;
    symmetric_eigen(gram, values, vectors);

    const double lead = std::max(values.empty() ? 0.0 : values[0], 0.0);
    std::size_t rank = 0;
    for (double v : values)
        if (v > lead * 1e-12 && v > 1e-300) ++rank;
    if (k > rank)
        throw UsageError("uncentered_pca: k = " + std::to_string(k) +
                         " exceeds attainable rank " + std::to_string(rank));

    Projection proj;
    proj.k = k;
    proj.basis = Matrix(k, d);
    for (std::size_t r = 0; r < k; ++r) {
        // Fix the sign: largest-magnitude entry positive.
        std::size_t arg = 0;
        for (std::size_t c = 1; c < d; ++c)
            if (std::abs(vectors(r, c)) > std::abs(vectors(r, arg))) arg = c;
        const double flip = vectors(r, arg) < 0.0 ? -1.0 : 1.0;
        for (std::size_t c = 0; c < d; ++c)
            proj.basis(r, c) = flip * vectors(r, c);
    }
    return proj;
}

std::vector<DissectRow> dissect_report(const Classifier& clf,
                                       const SplitBundle& bundle,
                                       int rare_class, std::size_t k) {
    std::vector<const Sample*> fit_samples;
    for (const Sample& s : bundle.train)
        if (s.label == rare_class) fit_samples.push_back(&s);
    if (fit_samples.empty())
        throw UsageError("dissect_report: rare class " +
                         std::to_string(rare_class) +
                         " has no training samples");

    const std::size_t m = clf.embedder.output_dim();
    Matrix fit(fit_samples.size(), m);
    std::vector<double> z;
    for (std::size_t r = 0; r < fit_samples.size(); ++r) {
        clf.embedder.embed(fit_samples[r]->features, z);
        for (std::size_t c = 0; c < m; ++c) fit(r, c) = z[c];
    }
    const Projection proj = uncentered_pca(fit, k);

    std::vector<DissectRow> rows;
    rows.reserve(bundle.validation.size());
    for (const Sample& s : bundle.validation) {
        clf.embedder.embed(s.features, z);
        DissectRow row;
        row.id = s.id;
        row.split = "val";
        row.label = s.label;
        row.coords = proj.project(z);
        rows.push_back(std::move(row));
    }
    std::sort(rows.begin(), rows.end(), [](const DissectRow& a, const DissectRow& b) {
        if (a.coords[0] != b.coords[0]) return a.coords[0] > b.coords[0];
        return a.id < b.id;
    });
    return rows;
}

void write_dissect_csv(const std::string& path,
                       const std::vector<DissectRow>& rows) {
    CsvWriter w;
    const std::size_t k = rows.empty() ? 2 : rows.front().coords.size();
    std::vector<std::string> header = {"id", "split", "class"};
    for (std::size_t c = 0; c < k; ++c) header.push_back("c" + std::to_string(c));
    w.row(header);
    for (const DissectRow& row : rows) {
        std::vector<std::string> cells = {std::to_string(row.id), row.split,
                                          std::to_string(row.label)};
        for (double v : row.coords) cells.push_back(format_double(v));
        w.row(cells);
    }
    w.save(path);
}

}  // namespace rarefind
