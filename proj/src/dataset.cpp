#include "grmtl/dataset.hpp"
#include "grmtl/csv.hpp"
#include "grmtl/error.hpp"
#include "grmtl/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace grmtl {

namespace {

std::string cell_ref(std::string_view source, std::size_t line, std::size_t column) {
    std::ostringstream os;
    os << source << ": line " << line << ", column " << column;
    return os.str();
}

bool looks_non_finite(std::string cell) {
    std::transform(cell.begin(), cell.end(), cell.begin(), [](unsigned char c) { return std::tolower(c); });
    if (!cell.empty() && (cell.front() == '+' || cell.front() == '-'))
        cell.erase(cell.begin());
    return cell == "inf" || cell == "infinity" || cell == "nan";
}

double parse_cell(const std::string& cell, std::string_view source, std::size_t line, std::size_t column) {
    if (auto value = csv::parse_real(cell))
        return *value;
    if (looks_non_finite(cell))
        throw Error(ErrorKind::Parse, "non-finite value '" + cell + "' at " + cell_ref(source, line, column));
    throw Error(ErrorKind::Parse, "cannot parse '" + cell + "' as a real number at " + cell_ref(source, line, column));
}

std::string join_ids(const std::vector<std::string>& ids, std::size_t limit = 20) {
    std::string out;
    for (std::size_t i = 0; i < ids.size() && i < limit; ++i) {
        if (i)
            out += ", ";
        out += ids[i];
    }
    if (ids.size() > limit)
        out += ", ... (" + std::to_string(ids.size()) + " total)";
    return out;
}

} // namespace

void FeatureMatrix::validate() const {
    if (data.rows() < 1 || data.cols() < 1)
        throw Error(ErrorKind::Shape, "feature matrix must have at least one row and one column");
    if (static_cast<Index>(sample_ids.size()) != data.rows())
        throw Error(ErrorKind::Shape, "sample id count does not match feature rows");
    if (!feature_names.empty() && static_cast<Index>(feature_names.size()) != data.cols())
        throw Error(ErrorKind::Shape, "feature name count does not match feature columns");
    for (Index j = 0; j < data.cols(); ++j)
        for (Index i = 0; i < data.rows(); ++i)
            if (!std::isfinite(data(i, j)))
                throw Error(ErrorKind::Numeric, "non-finite feature at row " + std::to_string(i) + ", column " +
                                                    std::to_string(j));
    std::set<std::string> seen;
    for (const auto& id : sample_ids)
        if (!seen.insert(id).second)
            throw Error(ErrorKind::Domain, "duplicate sample id '" + id + "'");
}

std::map<std::string, Index> FeatureMatrix::id_index() const {
    std::map<std::string, Index> index;
    for (std::size_t i = 0; i < sample_ids.size(); ++i)
        index.emplace(sample_ids[i], static_cast<Index>(i));
    return index;
}

FeatureMatrix FeatureMatrix::subset(const std::vector<Index>& rows) const {
    FeatureMatrix out;
    out.data = select_rows(data, rows);
    out.feature_names = feature_names;
    out.sample_ids.reserve(rows.size());
    for (Index r : rows)
        out.sample_ids.push_back(sample_ids[static_cast<std::size_t>(r)]);
    return out;
}

FeatureMatrix parse_features(std::istream& in, const CsvOptions& options, std::string_view source) {
    const csv::Table table = csv::read(in);
    std::size_t first = options.has_header ? 1 : 0;
    if (table.rows.size() <= first)
        throw Error(ErrorKind::Parse, std::string(source) + ": no rows");

    const std::size_t offset = options.has_id_column ? 1 : 0;
    const std::size_t width = table.rows[first].size();
    if (width <= offset)
        throw Error(ErrorKind::Parse, std::string(source) + ": no feature columns");
    if (options.has_header && table.rows[0].size() != width)
        throw Error(ErrorKind::Parse, std::string(source) + ": header has " + std::to_string(table.rows[0].size()) +
                                          " columns but data rows have " + std::to_string(width));

    const auto n = static_cast<Index>(table.rows.size() - first);
    const auto d = static_cast<Index>(width - offset);
    FeatureMatrix fm;
    fm.data.resize(n, d);
    fm.sample_ids.reserve(static_cast<std::size_t>(n));

    for (std::size_t r = first; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::size_t line = table.line_numbers[r];
        if (row.size() != width)
            throw Error(ErrorKind::Parse, std::string(source) + ": line " + std::to_string(line) + " has " +
                                              std::to_string(row.size()) + " columns, expected " +
                                              std::to_string(width));
        const auto i = static_cast<Index>(r - first);
        fm.sample_ids.push_back(options.has_id_column ? row[0] : std::to_string(i));
        for (std::size_t c = offset; c < width; ++c)
            fm.data(i, static_cast<Index>(c - offset)) = parse_cell(row[c], source, line, c + 1);
    }

    if (options.has_header)
        fm.feature_names.assign(table.rows[0].begin() + static_cast<std::ptrdiff_t>(offset), table.rows[0].end());
    else
        for (Index j = 0; j < d; ++j)
            fm.feature_names.push_back("f" + std::to_string(j + 1));

    fm.validate();
    return fm;
}

FeatureMatrix load_features(const std::filesystem::path& path, const CsvOptions& options) {
    auto in = csv::open_input(path);
    return parse_features(in, options, path.string());
}

void save_features(const std::filesystem::path& path, const FeatureMatrix& features) {
    features.validate();
    auto out = csv::open_output(path);
    csv::Row header{"id"};
    for (Index j = 0; j < features.cols(); ++j)
        header.push_back(features.feature_names.empty() ? "f" + std::to_string(j + 1)
                                                        : features.feature_names[static_cast<std::size_t>(j)]);
    out << csv::join(header) << '\n';
    for (Index i = 0; i < features.rows(); ++i) {
        csv::Row row{features.sample_ids[static_cast<std::size_t>(i)]};
        for (Index j = 0; j < features.cols(); ++j)
            row.push_back(csv::format_real(features.data(i, j)));
        out << csv::join(row) << '\n';
    }
    if (!out)
        throw Error(ErrorKind::Io, "failed writing '" + path.string() + "'");
}

std::vector<double> RaterScores::row_scores(Index row) const {
    std::vector<double> out;
    for (Index r = 0; r < scores.cols(); ++r)
        if (present(row, r))
            out.push_back(scores(row, r));
    return out;
}

Index RaterScores::present_count(Index row) const { return present.row(row).count(); }

void RaterScores::validate() const {
    if (scale.min >= scale.max)
        throw Error(ErrorKind::Domain, "task '" + task_name + "': scale minimum must be below maximum");
    if (present.rows() != scores.rows() || present.cols() != scores.cols() ||
        static_cast<Index>(sample_ids.size()) != scores.rows())
        throw Error(ErrorKind::Shape, "task '" + task_name + "': rater table shapes disagree");
    for (Index i = 0; i < scores.rows(); ++i) {
        if (present_count(i) == 0)
            throw Error(ErrorKind::Domain, "task '" + task_name + "': sample '" +
                                               sample_ids[static_cast<std::size_t>(i)] + "' has no present scores");
        for (Index r = 0; r < scores.cols(); ++r) {
            if (!present(i, r))
                continue;
            const double s = scores(i, r);
            if (!(s >= scale.min && s <= scale.max))
                throw Error(ErrorKind::Domain, "task '" + task_name + "': score " + csv::format_real(s) +
                                                   " for sample '" + sample_ids[static_cast<std::size_t>(i)] +
                                                   "' is outside [" + std::to_string(scale.min) + ", " +
                                                   std::to_string(scale.max) + "]");
        }
    }
}

std::vector<RaterScores> parse_raters(std::istream& in, const std::map<std::string, ScoreScale>& scales,
                                      const ScoreScale& default_scale, bool has_header, std::string_view source) {
    const csv::Table table = csv::read(in);
    const std::size_t first = has_header ? 1 : 0;
    if (table.rows.size() <= first)
        throw Error(ErrorKind::Parse, std::string(source) + ": no rows");

    struct Pending {
        std::vector<std::string> ids;
        std::vector<std::vector<std::optional<double>>> cells;
        std::set<std::string> seen;
    };
    std::vector<std::string> order;
    std::map<std::string, Pending> by_task;
    std::size_t width = 0;

    for (std::size_t r = first; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::size_t line = table.line_numbers[r];
        if (row.size() < 3)
            throw Error(ErrorKind::Parse, std::string(source) + ": line " + std::to_string(line) +
                                              " needs id, task and at least one score column");
        const std::string& id = row[0];
        const std::string& task = row[1];
        if (task.empty())
            throw Error(ErrorKind::Parse, cell_ref(source, line, 2) + ": empty task name");
        auto [it, inserted] = by_task.try_emplace(task);
        if (inserted)
            order.push_back(task);
        Pending& pending = it->second;
        if (!pending.seen.insert(id).second)
            throw Error(ErrorKind::Parse, std::string(source) + ": line " + std::to_string(line) +
                                              ": duplicate row for sample '" + id + "', task '" + task + "'");
        std::vector<std::optional<double>> cells;
        for (std::size_t c = 2; c < row.size(); ++c) {
            if (row[c].empty())
                cells.emplace_back(std::nullopt);
            else
                cells.emplace_back(parse_cell(row[c], source, line, c + 1));
        }
        width = std::max(width, cells.size());
        pending.ids.push_back(id);
        pending.cells.push_back(std::move(cells));
    }

    std::vector<RaterScores> out;
    for (const auto& task : order) {
        const Pending& pending = by_task.at(task);
        RaterScores rs;
        rs.task_name = task;
        auto sit = scales.find(task);
        rs.scale = sit != scales.end() ? sit->second : default_scale;
        rs.sample_ids = pending.ids;
        const auto n = static_cast<Index>(pending.ids.size());
        rs.scores = Matrix::Zero(n, static_cast<Index>(width));
        rs.present.setConstant(n, static_cast<Index>(width), false);
        for (Index i = 0; i < n; ++i) {
            const auto& cells = pending.cells[static_cast<std::size_t>(i)];
            for (std::size_t c = 0; c < cells.size(); ++c)
                if (cells[c]) {
                    rs.scores(i, static_cast<Index>(c)) = *cells[c];
                    rs.present(i, static_cast<Index>(c)) = true;
                }
        }
        rs.validate();
        out.push_back(std::move(rs));
    }
    return out;
}

std::vector<RaterScores> load_raters(const std::filesystem::path& path,
                                     const std::map<std::string, ScoreScale>& scales,
                                     const ScoreScale& default_scale, bool has_header) {
    auto in = csv::open_input(path);
    return parse_raters(in, scales, default_scale, has_header, path.string());
}

RaterAggregate aggregate_raters(const RaterScores& raw, bool exclude_at_pivot, int min_raters) {
    const Index n = raw.rows();
    RaterAggregate agg;
    agg.targets.resize(n);
    agg.mask.assign(static_cast<std::size_t>(n), true);
    const double pivot = raw.scale.pivot();
    for (Index i = 0; i < n; ++i) {
        const auto scores = raw.row_scores(i);
        if (scores.empty())
            throw Error(ErrorKind::Domain, "task '" + raw.task_name + "': sample '" +
                                               raw.sample_ids[static_cast<std::size_t>(i)] +
                                               "' has no present scores");
        const double mean =
            std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size());
        agg.targets(i) = mean;
        const bool too_few = static_cast<int>(scores.size()) < min_raters;
        const bool at_pivot = exclude_at_pivot && mean == pivot;
        agg.mask[static_cast<std::size_t>(i)] = !(too_few || at_pivot);
    }
    return agg;
}

Labels binarize(const Vector& targets, const ScoreScale& scale, const std::vector<bool>& mask, TieRule tie) {
    if (!mask.empty() && static_cast<Index>(mask.size()) != targets.size())
        throw Error(ErrorKind::Shape, "binarize: mask length differs from targets");
    const double pivot = scale.pivot();
    Labels labels(static_cast<std::size_t>(targets.size()), -1);
    for (Index i = 0; i < targets.size(); ++i) {
        if (!mask.empty() && !mask[static_cast<std::size_t>(i)])
            continue;
        const double t = targets(i);
        if (!(t >= scale.min && t <= scale.max))
            throw Error(ErrorKind::Domain, "binarize: target " + csv::format_real(t) + " at row " +
                                               std::to_string(i) + " is outside the scale");
        if (t > pivot)
            labels[static_cast<std::size_t>(i)] = 1;
        else if (t == pivot && tie == TieRule::Reject)
            throw Error(ErrorKind::Domain, "binarize: target at row " + std::to_string(i) +
                                               " equals the pivot " + csv::format_real(pivot) +
                                               " and is not masked");
    }
    return labels;
}

Index TaskTargets::task_index(std::string_view name) const {
    auto it = std::find(task_names.begin(), task_names.end(), name);
    if (it == task_names.end())
        throw Error(ErrorKind::Domain, "unknown task '" + std::string(name) + "'");
    return static_cast<Index>(it - task_names.begin());
}

TaskTargets build_task_targets(const std::vector<RaterScores>& raters, const std::vector<std::string>& sample_ids,
                               const TargetOptions& options) {
    std::map<std::string, Index> index;
    for (std::size_t i = 0; i < sample_ids.size(); ++i)
        index.emplace(sample_ids[i], static_cast<Index>(i));
    const auto n = static_cast<Index>(sample_ids.size());

    const auto primary_it = std::find_if(raters.begin(), raters.end(),
                                         [&](const RaterScores& rs) { return rs.task_name == options.primary_task; });
    if (primary_it == raters.end())
        throw Error(ErrorKind::Domain, "rater file has no rows for primary task '" + options.primary_task + "'");

    std::vector<std::string> unknown;
    for (const auto& rs : raters)
        for (const auto& id : rs.sample_ids)
            if (!index.count(id))
                unknown.push_back(id);
    if (!unknown.empty()) {
        std::sort(unknown.begin(), unknown.end());
        unknown.erase(std::unique(unknown.begin(), unknown.end()), unknown.end());
        throw Error(ErrorKind::Domain, "rater ids missing from features: " + join_ids(unknown));
    }
    {
        std::set<std::string> covered(primary_it->sample_ids.begin(), primary_it->sample_ids.end());
        std::vector<std::string> missing;
        for (const auto& id : sample_ids)
            if (!covered.count(id))
                missing.push_back(id);
        if (!missing.empty())
            throw Error(ErrorKind::Domain, "feature ids missing from raters for task '" + options.primary_task +
                                               "': " + join_ids(missing));
    }

    TaskTargets tt;
    tt.sample_ids = sample_ids;
    const auto m = static_cast<Index>(raters.size());
    tt.targets.resize(n, m);
    tt.binary_labels.setConstant(n, m, -1);
    tt.mask.setConstant(n, m, false);

    for (Index t = 0; t < m; ++t) {
        const RaterScores& src = raters[static_cast<std::size_t>(t)];
        const bool primary = src.task_name == options.primary_task;
        RaterScores aligned;
        aligned.task_name = src.task_name;
        aligned.scale = src.scale;
        aligned.sample_ids = sample_ids;
        aligned.scores = Matrix::Zero(n, src.scores.cols());
        aligned.present.setConstant(n, src.scores.cols(), false);
        for (Index r = 0; r < src.rows(); ++r) {
            const Index row = index.at(src.sample_ids[static_cast<std::size_t>(r)]);
            aligned.scores.row(row) = src.scores.row(r);
            aligned.present.row(row) = src.present.row(r);
        }

        Vector means = Vector::Constant(n, src.scale.pivot());
        std::vector<bool> keep(static_cast<std::size_t>(n), false);
        for (Index i = 0; i < n; ++i) {
            const auto scores = aligned.row_scores(i);
            if (scores.empty())
                continue;
            const double mean =
                std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size());
            means(i) = mean;
            if (primary) {
                const bool enough = static_cast<int>(scores.size()) >= options.min_raters;
                const bool at_pivot = options.exclude_primary_pivot && mean == src.scale.pivot();
                keep[static_cast<std::size_t>(i)] = enough && !at_pivot;
            } else {
                keep[static_cast<std::size_t>(i)] = true;
            }
        }
        const Labels labels = binarize(means, src.scale, keep, primary ? TieRule::Reject : options.attribute_tie);
        tt.task_names.push_back(src.task_name);
        tt.scales.push_back(src.scale);
        tt.targets.col(t) = means;
        for (Index i = 0; i < n; ++i) {
            tt.binary_labels(i, t) = labels[static_cast<std::size_t>(i)];
            tt.mask(i, t) = keep[static_cast<std::size_t>(i)];
        }
        tt.raters.push_back(std::move(aligned));
    }
    return tt;
}

Resampled adasyn_rebalance(const FeatureMatrix& features, const Labels& labels, int k_neighbors,
                           std::uint64_t seed) {
    features.validate();
    const Index n = features.rows();
    if (static_cast<Index>(labels.size()) != n)
        throw Error(ErrorKind::Shape, "adasyn: label count differs from feature rows");
    if (k_neighbors < 1)
        throw Error(ErrorKind::Domain, "adasyn: k_neighbors must be at least 1");

    std::vector<Index> pos, neg;
    for (Index i = 0; i < n; ++i) {
        const int y = labels[static_cast<std::size_t>(i)];
        if (y == 1)
            pos.push_back(i);
        else if (y == -1)
            neg.push_back(i);
        else
            throw Error(ErrorKind::Domain, "adasyn: labels must be -1 or +1");
    }
    if (pos.empty() || neg.empty())
        throw Error(ErrorKind::Domain, "adasyn: both classes must be present");

    Resampled out{features, labels, 0};
    if (pos.size() == neg.size())
        return out;

    const bool pos_minority = pos.size() < neg.size();
    const auto& minority = pos_minority ? pos : neg;
    const int minority_label = pos_minority ? 1 : -1;
    const auto total_new = static_cast<Index>(pos_minority ? neg.size() - pos.size() : pos.size() - neg.size());
    if (static_cast<Index>(minority.size()) < k_neighbors + 1)
        throw Error(ErrorKind::Domain, "adasyn: minority class has " + std::to_string(minority.size()) +
                                           " samples, needs at least k_neighbors + 1 = " +
                                           std::to_string(k_neighbors + 1));

    const Matrix& x = features.data;
    auto nearest = [&](Index center, const std::vector<Index>& pool) {
        std::vector<std::pair<double, Index>> dist;
        dist.reserve(pool.size());
        for (Index j : pool)
            if (j != center)
                dist.emplace_back((x.row(j) - x.row(center)).squaredNorm(), j);
        const auto k = std::min<std::size_t>(static_cast<std::size_t>(k_neighbors), dist.size());
        std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
        std::vector<Index> idx;
        for (std::size_t i = 0; i < k; ++i)
            idx.push_back(dist[i].second);
        return idx;
    };

    std::vector<Index> everyone(static_cast<std::size_t>(n));
    std::iota(everyone.begin(), everyone.end(), Index{0});

    // Density ratio: share of majority points among each minority point's neighbours.
    std::vector<double> ratio(minority.size());
    for (std::size_t i = 0; i < minority.size(); ++i) {
        const auto nb = nearest(minority[i], everyone);
        const auto majority = std::count_if(nb.begin(), nb.end(), [&](Index j) {
            return labels[static_cast<std::size_t>(j)] != minority_label;
        });
        ratio[i] = static_cast<double>(majority) / static_cast<double>(k_neighbors);
    }
    const double ratio_sum = std::accumulate(ratio.begin(), ratio.end(), 0.0);
    for (auto& r : ratio)
        r = ratio_sum > 0.0 ? r / ratio_sum : 1.0 / static_cast<double>(ratio.size());

    // Largest-remainder rounding so the per-point counts sum to total_new.
    std::vector<Index> quota(minority.size());
    std::vector<std::pair<double, std::size_t>> remainders;
    Index assigned = 0;
    for (std::size_t i = 0; i < minority.size(); ++i) {
        const double exact = ratio[i] * static_cast<double>(total_new);
        quota[i] = static_cast<Index>(std::floor(exact));
        assigned += quota[i];
        remainders.emplace_back(exact - std::floor(exact), i);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t i = 0; assigned < total_new; ++i, ++assigned)
        ++quota[remainders[i % remainders.size()].second];

    Rng rng(seed);
    Matrix synth(total_new, x.cols());
    Index row = 0;
    for (std::size_t i = 0; i < minority.size(); ++i) {
        if (quota[i] == 0)
            continue;
        const auto nb = nearest(minority[i], minority);
        for (Index g = 0; g < quota[i]; ++g) {
            const Index z = nb[static_cast<std::size_t>(rng.below(nb.size()))];
            const double lambda = rng.uniform();
            synth.row(row++) = x.row(minority[i]) + lambda * (x.row(z) - x.row(minority[i]));
        }
    }

    out.features.data.conservativeResize(n + total_new, Eigen::NoChange);
    out.features.data.bottomRows(total_new) = synth;
    for (Index g = 0; g < total_new; ++g) {
        out.features.sample_ids.push_back("adasyn-" + std::to_string(g));
        out.labels.push_back(minority_label);
    }
    out.synthetic_count = total_new;
    out.features.validate();
    return out;
}

std::vector<Index> CvPlan::test_indices(int fold) const {
    std::vector<Index> out;
    for (std::size_t i = 0; i < assignments.size(); ++i)
        if (assignments[i] == fold)
            out.push_back(static_cast<Index>(i));
    return out;
}

std::vector<Index> CvPlan::train_indices(int fold) const {
    std::vector<Index> out;
    for (std::size_t i = 0; i < assignments.size(); ++i)
        if (assignments[i] != fold)
            out.push_back(static_cast<Index>(i));
    return out;
}

CvPlan make_cv_plan(const Labels& labels, int n_folds, std::uint64_t seed, bool stratified,
                    std::optional<std::string> stratify_on) {
    if (n_folds < 2)
        throw Error(ErrorKind::Domain, "cv: n_folds must be at least 2");
    const std::size_t n = labels.size();
    if (n < static_cast<std::size_t>(n_folds))
        throw Error(ErrorKind::Domain, "cv: " + std::to_string(n) + " samples cannot fill " +
                                           std::to_string(n_folds) + " folds");

    Rng rng(seed);
    std::vector<std::size_t> order;
    if (stratified) {
        std::map<int, std::vector<std::size_t>> groups;
        for (std::size_t i = 0; i < n; ++i)
            groups[labels[i]].push_back(i);
        for (auto& [label, members] : groups) {
            rng.shuffle(members);
            order.insert(order.end(), members.begin(), members.end());
        }
    } else {
        order.resize(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        rng.shuffle(order);
    }

    CvPlan plan;
    plan.n_folds = n_folds;
    plan.seed = seed;
    plan.stratify_on = stratified ? std::move(stratify_on) : std::nullopt;
    plan.assignments.assign(n, 0);
    for (std::size_t pos = 0; pos < n; ++pos)
        plan.assignments[order[pos]] = static_cast<int>(pos % static_cast<std::size_t>(n_folds));
    return plan;
}

Standardizer Standardizer::fit(const Matrix& x) {
    if (x.rows() < 1)
        throw Error(ErrorKind::Shape, "standardizer: no rows");
    Standardizer s;
    s.mean = x.colwise().mean().transpose();
    s.scale.resize(x.cols());
    for (Index j = 0; j < x.cols(); ++j) {
        const double sd = std::sqrt((x.col(j).array() - s.mean(j)).square().mean());
        s.scale(j) = sd > 1e-12 ? sd : 1.0;
    }
    return s;
}

Matrix Standardizer::apply(const Matrix& x) const {
    if (x.cols() != mean.size())
        throw Error(ErrorKind::Shape, "standardizer: column count mismatch");
    return ((x.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array()).matrix();
}

} // namespace grmtl
