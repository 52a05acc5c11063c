#include "survtreeful/dataset.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <unordered_set>

namespace survtreeful {
namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r'))
        --e;
    return s.substr(b, e - b);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(trim(field));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_real(const std::string& s, std::size_t row,
                  const std::string& col) {
    const char* begin = s.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0')
        throw DataError("row " + std::to_string(row) + ": column '" + col +
                        "' has unparseable value '" + s + "'");
    return v;
}

}  // namespace

void validate_schema(const std::vector<CovariateSpec>& schema) {
    std::unordered_set<std::string> names;
    for (const auto& spec : schema) {
        if (spec.name.empty()) throw ConfigError("covariate with empty name");
        if (!names.insert(spec.name).second)
            throw ConfigError("duplicate covariate name '" + spec.name + "'");
        if (spec.kind == CovariateKind::nominal) {
            if (spec.levels.empty())
                throw ConfigError("nominal covariate '" + spec.name +
                                  "' has no levels");
            std::unordered_set<std::string> lv;
            for (const auto& l : spec.levels)
                if (!lv.insert(l).second)
                    throw ConfigError("nominal covariate '" + spec.name +
                                      "' has duplicate level '" + l + "'");
        } else if (!spec.levels.empty()) {
            throw ConfigError("covariate '" + spec.name +
                              "' is not nominal but declares levels");
        }
    }
}

std::size_t SurvivalDataset::n_events() const {
    std::size_t c = 0;
    for (auto s : status) c += s;
    return c;
}

std::size_t SurvivalDataset::var_index(const std::string& name) const {
    for (std::size_t j = 0; j < schema.size(); ++j)
        if (schema[j].name == name) return j;
    throw ConfigError("unknown covariate '" + name + "'");
}

SampleIndex full_index(const SurvivalDataset& data) {
    SampleIndex idx;
    idx.rows.resize(data.n_rows());
    for (std::size_t i = 0; i < idx.rows.size(); ++i)
        idx.rows[i] = static_cast<std::uint32_t>(i);
    return idx;
}

SurvivalDataset load_csv(const std::string& path,
                         std::vector<CovariateSpec> schema,
                         const std::string& time_col,
                         const std::string& status_col) {
    validate_schema(schema);
    std::ifstream in(path);
    if (!in) throw DataError("cannot open file '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw DataError("empty file '" + path + "'");
    const auto header = split_csv_line(line);

    auto find_col = [&](const std::string& name) -> std::size_t {
        for (std::size_t j = 0; j < header.size(); ++j)
            if (header[j] == name) return j;
        throw DataError("missing column '" + name + "' in '" + path + "'");
    };

    const std::size_t time_idx = find_col(time_col);
    const std::size_t status_idx = find_col(status_col);
    std::vector<std::size_t> var_idx;
    var_idx.reserve(schema.size());
    for (const auto& spec : schema) var_idx.push_back(find_col(spec.name));

    SurvivalDataset data;
    data.schema = std::move(schema);
    data.covariates.resize(data.schema.size());

    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        ++row;
        const auto fields = split_csv_line(line);
        if (fields.size() < header.size())
            throw DataError("row " + std::to_string(row) + ": expected " +
                            std::to_string(header.size()) + " fields, got " +
                            std::to_string(fields.size()));

        const double t = parse_real(fields[time_idx], row, time_col);
        if (!(t > 0.0))
            throw DataError("row " + std::to_string(row) +
                            ": nonpositive time " + fields[time_idx]);
        const std::string& sv = fields[status_idx];
        if (sv != "0" && sv != "1")
            throw DataError("row " + std::to_string(row) + ": status '" + sv +
                            "' is not 0 or 1");
        data.time.push_back(t);
        data.status.push_back(sv == "1" ? 1 : 0);

        for (std::size_t j = 0; j < data.schema.size(); ++j) {
            const auto& spec = data.schema[j];
            const std::string& raw = fields[var_idx[j]];
            double v;
            if (spec.kind == CovariateKind::nominal) {
                const auto it =
                    std::find(spec.levels.begin(), spec.levels.end(), raw);
                if (it == spec.levels.end())
                    throw DataError("row " + std::to_string(row) +
                                    ": unknown level '" + raw +
                                    "' for covariate '" + spec.name + "'");
                v = static_cast<double>(it - spec.levels.begin());
            } else {
                v = parse_real(raw, row, spec.name);
                if (spec.kind == CovariateKind::binary && v != 0.0 && v != 1.0)
                    throw DataError("row " + std::to_string(row) +
                                    ": binary covariate '" + spec.name +
                                    "' has value '" + raw + "'");
            }
            data.covariates[j].push_back(v);
        }
    }
    return data;
}

std::vector<SampleIndex> stratified_partition(const SurvivalDataset& data,
                                              const SampleIndex& pool, int k,
                                              Rng& rng) {
    if (k < 2) throw ConfigError("partition needs k >= 2");
    std::vector<std::uint32_t> strata[2];
    for (auto r : pool.rows) strata[data.status[r] ? 1 : 0].push_back(r);

    std::vector<SampleIndex> parts(static_cast<std::size_t>(k));
    // Events first, then censored; within a stratum the shuffled order is
    // dealt to parts in blocks, extras going to the lowest-numbered parts.
    for (int s = 1; s >= 0; --s) {
        auto& rows = strata[s];
        if (rows.size() < static_cast<std::size_t>(k))
            throw DataError("stratum (status=" + std::to_string(s) + ") has " +
                            std::to_string(rows.size()) + " rows, fewer than " +
                            std::to_string(k) + " parts");
        rng.shuffle(rows);
        const std::size_t base = rows.size() / static_cast<std::size_t>(k);
        const std::size_t extra = rows.size() % static_cast<std::size_t>(k);
        std::size_t pos = 0;
        for (int p = 0; p < k; ++p) {
            const std::size_t take =
                base + (static_cast<std::size_t>(p) < extra ? 1 : 0);
            auto& out = parts[static_cast<std::size_t>(p)].rows;
            out.insert(out.end(), rows.begin() + static_cast<std::ptrdiff_t>(pos),
                       rows.begin() + static_cast<std::ptrdiff_t>(pos + take));
            pos += take;
        }
    }
    for (auto& p : parts) std::sort(p.rows.begin(), p.rows.end());
    return parts;
}

std::vector<SampleIndex> stratified_partition(const SurvivalDataset& data,
                                              int k, Rng& rng) {
    return stratified_partition(data, full_index(data), k, rng);
}

SampleIndex stratified_bootstrap(const SurvivalDataset& data,
                                 const SampleIndex& pool, std::size_t m,
                                 Rng& rng) {
    if (m < 1) throw DataError("bootstrap size must be >= 1");
    std::vector<std::uint32_t> strata[2];
    for (auto r : pool.rows) strata[data.status[r] ? 1 : 0].push_back(r);
    const std::size_t n = pool.rows.size();
    if (n == 0) throw DataError("empty pool");

    // Largest-remainder quotas over the two strata; tie goes to events.
    const double exact1 =
        static_cast<double>(m) * static_cast<double>(strata[1].size()) /
        static_cast<double>(n);
    std::size_t q1 = static_cast<std::size_t>(exact1);
    std::size_t q0 = m * strata[0].size() / n;
    if (q1 + q0 < m) {
        const double f1 = exact1 - static_cast<double>(q1);
        const double f0 = (static_cast<double>(m) - exact1) -
                          static_cast<double>(q0);
        if (f1 >= f0)
            ++q1;
        else
            ++q0;
    }

    SampleIndex out;
    out.rows.reserve(m);
    const std::size_t quota[2] = {q0, q1};
    for (int s = 1; s >= 0; --s) {
        if (quota[s] == 0) continue;
        if (strata[s].empty())
            throw DataError("stratum (status=" + std::to_string(s) +
                            ") empty but quota is " +
                            std::to_string(quota[s]));
        for (std::size_t i = 0; i < quota[s]; ++i)
            out.rows.push_back(strata[s][rng.below(strata[s].size())]);
    }
    return out;
}

std::vector<double> gather(const std::vector<double>& column,
                           const SampleIndex& rows) {
    std::vector<double> out;
    out.reserve(rows.size());
    for (auto r : rows.rows) out.push_back(column[r]);
    return out;
}

std::vector<std::uint8_t> gather(const std::vector<std::uint8_t>& column,
                                 const SampleIndex& rows) {
    std::vector<std::uint8_t> out;
    out.reserve(rows.size());
    for (auto r : rows.rows) out.push_back(column[r]);
    return out;
}

SampleIndex out_of_bag(const SampleIndex& pool, const SampleIndex& drawn) {
    std::unordered_set<std::uint32_t> hit(drawn.rows.begin(),
                                          drawn.rows.end());
    std::unordered_set<std::uint32_t> seen;
    SampleIndex out;
    for (auto r : pool.rows)
        if (!hit.count(r) && seen.insert(r).second) out.rows.push_back(r);
    return out;
}

}  // namespace survtreeful
