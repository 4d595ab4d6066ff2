#include "grmtl/synth.hpp"
#include "grmtl/csv.hpp"
#include "grmtl/error.hpp"
#include "grmtl/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace grmtl {

namespace {

std::vector<std::string> numbered(const std::string& prefix, Index count) {
    std::vector<std::string> out;
    for (Index i = 0; i < count; ++i)
        out.push_back(prefix + std::to_string(i + 1));
    return out;
}

// Coefficient magnitude in [0.5, 1.5) with a random sign, so no planted
// coefficient is too small to detect.
double planted_coefficient(Rng& rng) {
    const double magnitude = 0.5 + rng.uniform();
    return rng.uniform() < 0.5 ? -magnitude : magnitude;
}

Index count_from_fraction(double fraction, Index n) {
    return static_cast<Index>(std::llround(fraction * static_cast<double>(n)));
}

std::string cell_error(const std::filesystem::path& path, std::size_t line, std::size_t column) {
    return path.string() + ": line " + std::to_string(line) + ", column " + std::to_string(column);
}

} // namespace

MtlSynthData synth_mtl(const MtlSynthParams& p, std::uint64_t seed) {
    if (p.n < 2 || p.d < 1 || p.tasks < 1)
        throw Error(ErrorKind::Domain, "synth mtl: need n >= 2, d >= 1 and at least one task");
    if (!(p.support_fraction > 0.0 && p.support_fraction <= 1.0))
        throw Error(ErrorKind::Domain, "synth mtl: support_fraction must lie in (0, 1]");
    if (p.rank != 0 && p.rank != 1)
        throw Error(ErrorKind::Domain, "synth mtl: rank must be 0 (unconstrained) or 1");
    if (p.groups < 1 || p.groups > p.tasks)
        throw Error(ErrorKind::Domain, "synth mtl: groups must lie in [1, tasks]");
    if (!(p.noise >= 0.0) || !(p.task_spread >= 0.0) || !std::isfinite(p.offset))
        throw Error(ErrorKind::Domain, "synth mtl: noise and task_spread must be non-negative");

    Rng rng(seed);
    MtlSynthData out;
    out.task_names = numbered("task", p.tasks);

    std::vector<Index> features(static_cast<std::size_t>(p.d));
    std::iota(features.begin(), features.end(), Index{0});
    rng.shuffle(features);
    const Index k = std::max<Index>(1, count_from_fraction(p.support_fraction, p.d));
    out.support.assign(features.begin(), features.begin() + k);
    std::sort(out.support.begin(), out.support.end());

    out.planted_w = Matrix::Zero(p.d, p.tasks);
    if (p.rank == 1) {
        Vector u = Vector::Zero(p.d);
        for (Index j : out.support)
            u(j) = planted_coefficient(rng);
        for (Index t = 0; t < p.tasks; ++t)
            out.planted_w.col(t) = u * (0.5 + rng.uniform());
    } else {
        Matrix bases = Matrix::Zero(p.d, p.groups);
        for (Index g = 0; g < p.groups; ++g)
            for (Index j : out.support)
                bases(j, g) = planted_coefficient(rng);
        for (Index t = 0; t < p.tasks; ++t)
            for (Index j : out.support)
                out.planted_w(j, t) = bases(j, t % p.groups) + p.task_spread * rng.normal();
    }

    out.features.data.resize(p.n, p.d);
    for (Index i = 0; i < p.n; ++i)
        for (Index j = 0; j < p.d; ++j)
            out.features.data(i, j) = rng.normal();
    out.features.sample_ids = numbered("s", p.n);
    out.features.feature_names = numbered("f", p.d);

    out.targets = out.features.data * out.planted_w;
    for (Index t = 0; t < p.tasks; ++t)
        for (Index i = 0; i < p.n; ++i)
            out.targets(i, t) += p.offset + p.noise * rng.normal();
    return out;
}

LlpSynthData synth_llp(const LlpSynthParams& p, std::uint64_t seed) {
    if (p.n < 4 || p.d < 1)
        throw Error(ErrorKind::Domain, "synth llp: need n >= 4 and d >= 1");
    if (!(p.spread > 0.0) || !(p.negative_spread > 0.0) || !std::isfinite(p.separation))
        throw Error(ErrorKind::Domain, "synth llp: spreads must be positive");
    if (!(p.positive_fraction > 0.0 && p.positive_fraction < 1.0))
        throw Error(ErrorKind::Domain, "synth llp: positive_fraction must lie in (0, 1)");
    if (!(p.flip >= 0.0 && p.flip <= 1.0))
        throw Error(ErrorKind::Domain, "synth llp: flip must lie in [0, 1]");

    Rng rng(seed);
    const Index positives = std::clamp<Index>(count_from_fraction(p.positive_fraction, p.n), 1, p.n - 1);
    LlpSynthData out;
    out.generating.assign(static_cast<std::size_t>(p.n), -1);
    std::fill(out.generating.begin(), out.generating.begin() + positives, 1);
    rng.shuffle(out.generating);

    out.features.data.resize(p.n, p.d);
    for (Index i = 0; i < p.n; ++i) {
        const bool pos = out.generating[static_cast<std::size_t>(i)] == 1;
        const double spread = pos ? p.spread : p.negative_spread;
        for (Index j = 0; j < p.d; ++j)
            out.features.data(i, j) = spread * rng.normal();
        if (pos)
            out.features.data(i, 0) += p.separation;
    }
    out.features.sample_ids = numbered("s", p.n);
    out.features.feature_names = numbered("f", p.d);

    out.truth = out.generating;
    std::vector<Index> order(static_cast<std::size_t>(p.n));
    std::iota(order.begin(), order.end(), Index{0});
    rng.shuffle(order);
    const Index flips = count_from_fraction(p.flip, p.n);
    for (Index r = 0; r < flips; ++r)
        out.truth[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] *= -1;
    return out;
}

void save_targets(const std::filesystem::path& path, const std::vector<std::string>& ids,
                  const std::vector<std::string>& task_names, const Matrix& targets,
                  const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>& mask) {
    if (static_cast<Index>(ids.size()) != targets.rows() || static_cast<Index>(task_names.size()) != targets.cols())
        throw Error(ErrorKind::Shape, "save_targets: ids or task names do not match the target matrix");
    if (mask.size() != 0 && (mask.rows() != targets.rows() || mask.cols() != targets.cols()))
        throw Error(ErrorKind::Shape, "save_targets: mask shape differs from targets");
    auto out = csv::open_output(path);
    csv::Row header{"id"};
    header.insert(header.end(), task_names.begin(), task_names.end());
    out << csv::join(header) << '\n';
    for (Index i = 0; i < targets.rows(); ++i) {
        csv::Row row{ids[static_cast<std::size_t>(i)]};
        for (Index t = 0; t < targets.cols(); ++t)
            row.push_back(mask.size() != 0 && !mask(i, t) ? std::string() : csv::format_real(targets(i, t)));
        out << csv::join(row) << '\n';
    }
    if (!out)
        throw Error(ErrorKind::Io, "failed writing '" + path.string() + "'");
}

TargetTable load_targets(const std::filesystem::path& path) {
    auto in = csv::open_input(path);
    const csv::Table table = csv::read(in);
    if (table.rows.size() < 2)
        throw Error(ErrorKind::Parse, path.string() + ": no rows");
    const auto& header = table.rows[0];
    if (header.size() < 2)
        throw Error(ErrorKind::Parse, path.string() + ": expected an id column and at least one task column");
    TargetTable t;
    t.task_names.assign(header.begin() + 1, header.end());
    const auto n = static_cast<Index>(table.rows.size() - 1);
    const auto m = static_cast<Index>(t.task_names.size());
    t.targets = Matrix::Zero(n, m);
    t.mask.setConstant(n, m, false);
    std::set<std::string> seen;
    for (std::size_t r = 1; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::size_t line = table.line_numbers[r];
        if (row.size() != header.size())
            throw Error(ErrorKind::Parse, path.string() + ": line " + std::to_string(line) + " has " +
                                              std::to_string(row.size()) + " columns, expected " +
                                              std::to_string(header.size()));
        if (!seen.insert(row[0]).second)
            throw Error(ErrorKind::Domain, path.string() + ": duplicate id '" + row[0] + "'");
        t.sample_ids.push_back(row[0]);
        const auto i = static_cast<Index>(r - 1);
        for (std::size_t c = 1; c < row.size(); ++c) {
            if (row[c].empty())
                continue;
            const auto v = csv::parse_real(row[c]);
            if (!v)
                throw Error(ErrorKind::Parse, "cannot parse '" + row[c] + "' at " + cell_error(path, line, c + 1));
            t.targets(i, static_cast<Index>(c - 1)) = *v;
            t.mask(i, static_cast<Index>(c - 1)) = true;
        }
    }
    return t;
}

ValueTable load_values(const std::filesystem::path& path) {
    auto in = csv::open_input(path);
    const csv::Table table = csv::read(in);
    if (table.rows.size() < 2)
        throw Error(ErrorKind::Parse, path.string() + ": no rows");
    if (table.rows[0].size() != 2)
        throw Error(ErrorKind::Parse, path.string() + ": expected two columns (id, value)");
    ValueTable v;
    v.value_name = table.rows[0][1];
    std::set<std::string> seen;
    for (std::size_t r = 1; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::size_t line = table.line_numbers[r];
        if (row.size() != 2)
            throw Error(ErrorKind::Parse, path.string() + ": line " + std::to_string(line) + " has " +
                                              std::to_string(row.size()) + " columns, expected 2");
        if (!seen.insert(row[0]).second)
            throw Error(ErrorKind::Domain, path.string() + ": duplicate id '" + row[0] + "'");
        const auto value = csv::parse_real(row[1]);
        if (!value)
            throw Error(ErrorKind::Parse, "cannot parse '" + row[1] + "' at " + cell_error(path, line, 2));
        v.ids.push_back(row[0]);
        v.values.push_back(*value);
    }
    return v;
}

void save_values(const std::filesystem::path& path, const std::vector<std::string>& ids,
                 const std::vector<double>& values, const std::string& value_name) {
    if (ids.size() != values.size())
        throw Error(ErrorKind::Shape, "save_values: id and value counts differ");
    auto out = csv::open_output(path);
    out << csv::join({"id", value_name}) << '\n';
    for (std::size_t i = 0; i < ids.size(); ++i)
        out << csv::join({ids[i], csv::format_real(values[i])}) << '\n';
    if (!out)
        throw Error(ErrorKind::Io, "failed writing '" + path.string() + "'");
}

Labels to_binary_labels(const ValueTable& table) {
    Labels out;
    out.reserve(table.values.size());
    for (std::size_t i = 0; i < table.values.size(); ++i) {
        const double v = table.values[i];
        if (v != 1.0 && v != -1.0)
            throw Error(ErrorKind::Domain, "label for '" + table.ids[i] + "' must be -1 or +1");
        out.push_back(v > 0.0 ? 1 : -1);
    }
    return out;
}

} // namespace grmtl
