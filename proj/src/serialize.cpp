#include "grmtl/serialize.hpp"
#include "grmtl/csv.hpp"
#include "grmtl/error.hpp"

#include <fstream>
#include <sstream>

namespace grmtl {

namespace {

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

std::optional<double> read_optional(const Json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null())
        return std::nullopt;
    return j.at(key).get<double>();
}

Json summary_json(const RateSummary& s) {
    return Json{{"accuracy", s.accuracy},
                {"sensitivity", optional_number(s.sensitivity)},
                {"specificity", optional_number(s.specificity)},
                {"mean_abs_diff", optional_number(s.mean_abs_diff)}};
}

} // namespace

Json to_json(const EvalReport& r) {
    Json j;
    j["mode"] = to_string(r.mode);
    j["n"] = r.n;
    j["accuracy"] = r.accuracy;
    j["sensitivity"] = optional_number(r.sensitivity);
    j["specificity"] = optional_number(r.specificity);
    j["mean_abs_diff"] = optional_number(r.mean_abs_diff);
    if (r.confusion)
        j["confusion"] = {{"tp", r.confusion->tp}, {"fp", r.confusion->fp}, {"tn", r.confusion->tn},
                          {"fn", r.confusion->fn}};
    else
        j["confusion"] = nullptr;
    Json undefined = Json::array();
    if (r.mode == EvalReport::Mode::Binary) {
        if (!r.sensitivity)
            undefined.push_back("sensitivity");
        if (!r.specificity)
            undefined.push_back("specificity");
    }
    j["undefined_rates"] = undefined;
    if (r.hits)
        j["hits"] = *r.hits;
    if (r.abs_diff_total)
        j["abs_diff_total"] = *r.abs_diff_total;
    if (r.macro_average)
        j["macro_average"] = summary_json(*r.macro_average);
    Json folds = Json::array();
    for (const auto& f : r.per_fold)
        folds.push_back(to_json(f));
    j["per_fold"] = folds;
    return j;
}

EvalReport eval_report_from_json(const Json& j) {
    try {
        EvalReport r;
        const auto mode = j.at("mode").get<std::string>();
        if (mode == "regression")
            r.mode = EvalReport::Mode::Regression;
        else if (mode == "binary")
            r.mode = EvalReport::Mode::Binary;
        else
            throw Error(ErrorKind::Parse, "unknown report mode '" + mode + "'");
        r.n = j.at("n").get<std::int64_t>();
        r.accuracy = j.at("accuracy").get<double>();
        r.sensitivity = read_optional(j, "sensitivity");
        r.specificity = read_optional(j, "specificity");
        r.mean_abs_diff = read_optional(j, "mean_abs_diff");
        if (j.contains("confusion") && !j.at("confusion").is_null()) {
            const auto& c = j.at("confusion");
            r.confusion = Confusion{c.at("tp").get<std::int64_t>(), c.at("fp").get<std::int64_t>(),
                                    c.at("tn").get<std::int64_t>(), c.at("fn").get<std::int64_t>()};
        }
        if (j.contains("hits"))
            r.hits = j.at("hits").get<std::int64_t>();
        if (j.contains("abs_diff_total"))
            r.abs_diff_total = j.at("abs_diff_total").get<double>();
        if (j.contains("per_fold"))
            for (const auto& f : j.at("per_fold"))
                r.per_fold.push_back(eval_report_from_json(f));
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Parse, std::string("malformed report JSON: ") + e.what());
    }
}

Json to_json(const SvmModel& model) {
    Json w = Json::array();
    for (Index i = 0; i < model.weights.size(); ++i)
        w.push_back(model.weights(i));
    return Json{{"weights", w}, {"bias", model.bias}, {"cost", model.cost}};
}

SvmModel svm_model_from_json(const Json& j) {
    try {
        SvmModel m;
        const auto w = j.at("weights").get<std::vector<double>>();
        m.weights = Eigen::Map<const Vector>(w.data(), static_cast<Index>(w.size()));
        m.bias = j.at("bias").get<double>();
        m.cost = j.at("cost").get<double>();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Parse, std::string("malformed model JSON: ") + e.what());
    }
}

Json weight_metadata(const WeightMatrix& weights) {
    Json intercepts = Json::array();
    for (Index i = 0; i < weights.intercepts.size(); ++i)
        intercepts.push_back(weights.intercepts(i));
    return Json{{"task_names", weights.task_names},
                {"rows", weights.w.rows()},
                {"cols", weights.w.cols()},
                {"intercepts", intercepts}};
}

Json structure_metadata(const StructureMatrix& structure) {
    Json edges = Json::array();
    for (const auto& [a, b] : structure.edges)
        edges.push_back(Json::array({a, b}));
    return Json{{"num_tasks", structure.num_tasks}, {"edges", edges}};
}

void write_matrix_csv(const std::filesystem::path& path, const Matrix& m, const std::vector<std::string>& columns,
                      const std::vector<std::string>& row_names) {
    if (static_cast<Index>(columns.size()) != m.cols())
        throw Error(ErrorKind::Shape, "write_matrix_csv: column name count differs from matrix");
    if (!row_names.empty() && static_cast<Index>(row_names.size()) != m.rows())
        throw Error(ErrorKind::Shape, "write_matrix_csv: row name count differs from matrix");
    auto out = csv::open_output(path);
    csv::Row header;
    if (!row_names.empty())
        header.push_back("id");
    header.insert(header.end(), columns.begin(), columns.end());
    out << csv::join(header) << '\n';
    for (Index i = 0; i < m.rows(); ++i) {
        csv::Row row;
        if (!row_names.empty())
            row.push_back(row_names[static_cast<std::size_t>(i)]);
        for (Index j = 0; j < m.cols(); ++j)
            row.push_back(csv::format_real(m(i, j)));
        out << csv::join(row) << '\n';
    }
    if (!out)
        throw Error(ErrorKind::Io, "failed writing '" + path.string() + "'");
}

Matrix read_matrix_csv(const std::filesystem::path& path, std::vector<std::string>* columns, bool has_row_names) {
    auto in = csv::open_input(path);
    const csv::Table table = csv::read(in);
    if (table.rows.empty())
        throw Error(ErrorKind::Parse, path.string() + ": no rows");
    const std::size_t offset = has_row_names ? 1 : 0;
    const std::size_t width = table.rows[0].size();
    Matrix m(static_cast<Index>(table.rows.size() - 1), static_cast<Index>(width - offset));
    for (std::size_t r = 1; r < table.rows.size(); ++r) {
        if (table.rows[r].size() != width)
            throw Error(ErrorKind::Parse, path.string() + ": ragged row at line " +
                                              std::to_string(table.line_numbers[r]));
        for (std::size_t c = offset; c < width; ++c) {
            const auto v = csv::parse_real(table.rows[r][c]);
            if (!v)
                throw Error(ErrorKind::Parse, path.string() + ": bad number at line " +
                                                  std::to_string(table.line_numbers[r]) + ", column " +
                                                  std::to_string(c + 1));
            m(static_cast<Index>(r - 1), static_cast<Index>(c - offset)) = *v;
        }
    }
    if (columns)
        columns->assign(table.rows[0].begin() + static_cast<std::ptrdiff_t>(offset), table.rows[0].end());
    return m;
}

void write_weights(const std::filesystem::path& csv_path, const std::filesystem::path& json_path,
                   const WeightMatrix& weights, const Json& hyperparameters) {
    weights.validate();
    write_matrix_csv(csv_path, weights.w, weights.task_names);
    Json meta = weight_metadata(weights);
    meta["hyperparameters"] = hyperparameters;
    write_json(json_path, meta);
}

WeightMatrix read_weights(const std::filesystem::path& csv_path, const std::filesystem::path& json_path) {
    WeightMatrix w;
    w.w = read_matrix_csv(csv_path, &w.task_names);
    const Json meta = read_json(json_path);
    try {
        const auto intercepts = meta.at("intercepts").get<std::vector<double>>();
        w.intercepts = Eigen::Map<const Vector>(intercepts.data(), static_cast<Index>(intercepts.size()));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Parse, std::string("malformed weight metadata: ") + e.what());
    }
    w.validate();
    return w;
}

void write_structure(const std::filesystem::path& csv_path, const std::filesystem::path& json_path,
                     const StructureMatrix& structure, const std::vector<std::string>& task_names,
                     const Json& hyperparameters) {
    std::vector<std::string> columns;
    for (std::size_t e = 0; e < structure.edges.size(); ++e)
        columns.push_back("e" + std::to_string(e));
    write_matrix_csv(csv_path, structure.incidence, columns, task_names);
    Json meta = structure_metadata(structure);
    meta["task_names"] = task_names;
    meta["hyperparameters"] = hyperparameters;
    write_json(json_path, meta);
}

void write_json(const std::filesystem::path& path, const Json& j) {
    auto out = csv::open_output(path);
    out << j.dump(2) << '\n';
    if (!out)
        throw Error(ErrorKind::Io, "failed writing '" + path.string() + "'");
}

Json read_json(const std::filesystem::path& path) {
    auto in = csv::open_input(path);
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Parse, path.string() + ": malformed JSON: " + e.what());
    }
}

} // namespace grmtl
