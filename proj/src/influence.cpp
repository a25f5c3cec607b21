#include "cinf/influence.hpp"

#include "cinf/error.hpp"
#include "cinf/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace cinf {

namespace {

std::string gamma_label(double gamma) { return io::format_double(gamma); }

bool same_gamma(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)); }

}  // namespace

std::map<std::string, double> z_normalize_by_year(const std::map<std::string, double>& values,
                                                  const std::map<std::string, int>& years) {
    std::map<int, std::vector<const std::pair<const std::string, double>*>> groups;
    for (const auto& entry : values) {
        auto it = years.find(entry.first);
        if (it == years.end()) throw DataError("no publication year for document '" + entry.first + "'");
        groups[it->second].push_back(&entry);
    }
    std::map<std::string, double> out;
    for (const auto& [year, members] : groups) {
        const double n = static_cast<double>(members.size());
        double mean = 0.0;
        for (const auto* m : members) mean += m->second;
        mean /= n;
        double var = 0.0;
        for (const auto* m : members) var += (m->second - mean) * (m->second - mean);
        var /= n;
        const double sd = std::sqrt(var);
        const bool degenerate = !(sd > 1e-12 * std::max(1.0, std::abs(mean)));
        for (const auto* m : members) out[m->first] = degenerate ? 0.0 : (m->second - mean) / sd;
    }
    return out;
}

std::map<std::string, int> quantile_bins(const std::map<std::string, double>& scores) {
    const std::size_t n = scores.size();
    if (n < 4) throw DataError("quantile bins need at least four documents");
    std::vector<std::pair<double, const std::string*>> order;
    order.reserve(n);
    for (const auto& [doc, score] : scores) order.emplace_back(score, &doc);
    std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first < b.first;
        return *a.second < *b.second;
    });
    std::map<std::string, int> out;
    for (std::size_t r = 0; r < n; ++r) {
        // Percentile of rank r is r / n; compare in integers.
        int bin = 4;
        if (r * 100 < 50 * n) bin = 1;
        else if (r * 100 < 75 * n) bin = 2;
        else if (r * 100 < 90 * n) bin = 3;
        out[*order[r].second] = bin;
    }
    return out;
}

void write_raw_influence_csv(std::span<const RawInfluence> rows, const std::filesystem::path& path) {
    std::ostringstream out;
    out << io::schema_line("influence_raw", 1) << "\ndoc_id,alpha,kind,gamma\n";
    for (const auto& r : rows) {
        out << r.doc_id << ',' << io::format_double(r.alpha) << ',' << to_string(r.kind) << ','
            << gamma_label(r.gamma) << '\n';
    }
    io::write_atomic(path, out.str());
}

std::vector<RawInfluence> read_raw_influence_csv(const std::filesystem::path& path) {
    auto lines = io::read_data_lines(path, "influence_raw");
    std::vector<RawInfluence> rows;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i == 0 && lines[i].rfind("doc_id,", 0) == 0) continue;
        auto f = io::split(lines[i], ',');
        if (f.size() != 4) throw DataError(path.string() + ": bad influence row '" + lines[i] + "'");
        rows.push_back({f[0], io::parse_double(f[1], "alpha"), parse_change_kind(f[2]),
                        io::parse_double(f[3], "gamma")});
    }
    return rows;
}

void write_bandwidth_report(std::span<const BandwidthReportRow> rows, const std::filesystem::path& path) {
    std::ostringstream out;
    out << io::schema_line("bandwidth", 1)
        << "\n#kind\tgamma\ttrain_ll\theldout_ll\titerations\tconverged\tselected\n";
    for (const auto& r : rows) {
        out << to_string(r.kind) << '\t' << gamma_label(r.gamma) << '\t' << io::format_double(r.train_ll)
            << '\t' << io::format_double(r.heldout_ll) << '\t' << r.iterations << '\t' << (r.converged ? 1 : 0)
            << '\t' << (r.selected ? 1 : 0) << '\n';
    }
    io::write_atomic(path, out.str());
}

std::vector<BandwidthReportRow> read_bandwidth_report(const std::filesystem::path& path) {
    std::vector<BandwidthReportRow> rows;
    for (const auto& line : io::read_data_lines(path, "bandwidth")) {
        auto f = io::split(line, '\t');
        if (f.size() != 7) throw DataError(path.string() + ": bad bandwidth row '" + line + "'");
        rows.push_back({parse_change_kind(f[0]), io::parse_double(f[1], "gamma"),
                        io::parse_double(f[2], "train_ll"), io::parse_double(f[3], "heldout_ll"),
                        static_cast<int>(io::parse_int(f[4], "iterations")), f[5] == "1", f[6] == "1"});
    }
    return rows;
}

InfluenceTable featurize(std::span<const RawInfluence> raw, const DocumentTable& documents,
                         const FeaturizeOptions& options) {
    InfluenceTable table;
    table.gamma_semantic = options.gamma_semantic;
    table.gamma_lexical = options.gamma_lexical;
    std::set<double> gammas;
    for (const auto& r : raw) gammas.insert(r.gamma);
    gammas.insert(options.gamma_semantic);
    gammas.insert(options.gamma_lexical);
    // Collapse near-identical labels produced by decimal round trips.
    for (double g : gammas) {
        if (table.gammas.empty() || !same_gamma(table.gammas.back(), g)) table.gammas.push_back(g);
    }
    auto gamma_slot = [&](double g) {
        for (std::size_t i = 0; i < table.gammas.size(); ++i) {
            if (same_gamma(table.gammas[i], g)) return i;
        }
        throw DataError("unknown bandwidth");
    };

    std::map<std::string, int> years;
    std::vector<std::string> population;
    for (std::size_t i = 0; i < documents.doc_ids.size(); ++i) {
        if (options.min_year && documents.years[i] < *options.min_year) continue;
        years[documents.doc_ids[i]] = documents.years[i];
        population.push_back(documents.doc_ids[i]);
    }
    if (population.empty()) throw DataError("no documents in the influence population");

    // alpha[kind][gamma slot][doc]
    std::vector<std::vector<std::map<std::string, double>>> alpha(
        2, std::vector<std::map<std::string, double>>(table.gammas.size()));
    for (auto& per_kind : alpha) {
        for (auto& per_gamma : per_kind) {
            for (const auto& doc : population) per_gamma[doc] = 0.0;
        }
    }
    for (const auto& r : raw) {
        auto& target = alpha[r.kind == ChangeKind::Semantic ? 0 : 1][gamma_slot(r.gamma)];
        auto it = target.find(r.doc_id);
        if (it != target.end()) it->second = r.alpha;
    }
    std::vector<std::vector<std::map<std::string, double>>> z(2);
    for (int k = 0; k < 2; ++k) {
        for (const auto& per_gamma : alpha[k]) z[k].push_back(z_normalize_by_year(per_gamma, years));
    }
    const std::size_t sem_slot = gamma_slot(options.gamma_semantic);
    const std::size_t lex_slot = gamma_slot(options.gamma_lexical);
    const auto q_sem = quantile_bins(z[0][sem_slot]);
    const auto q_lex = quantile_bins(z[1][lex_slot]);

    for (const auto& doc : population) {
        InfluenceScore s;
        s.doc_id = doc;
        s.year = years.at(doc);
        s.alpha_semantic = alpha[0][sem_slot].at(doc);
        s.alpha_lexical = alpha[1][lex_slot].at(doc);
        s.z_semantic = z[0][sem_slot].at(doc);
        s.z_lexical = z[1][lex_slot].at(doc);
        s.quantile_semantic = q_sem.at(doc);
        s.quantile_lexical = q_lex.at(doc);
        for (std::size_t g = 0; g < table.gammas.size(); ++g) {
            s.z_semantic_by_gamma.push_back(z[0][g].at(doc));
            s.z_lexical_by_gamma.push_back(z[1][g].at(doc));
        }
        table.rows.push_back(std::move(s));
    }
    return table;
}

void write_features_csv(const InfluenceTable& table, const std::filesystem::path& path) {
    std::ostringstream out;
    out << io::schema_line("features", 1) << '\n';
    out << "#selected_gamma," << gamma_label(table.gamma_semantic) << ',' << gamma_label(table.gamma_lexical)
        << '\n';
    out << "doc_id,year,alpha_semantic,alpha_lexical,z_semantic,z_lexical,q_semantic,q_lexical";
    for (double g : table.gammas) out << ",z_semantic@" << gamma_label(g);
    for (double g : table.gammas) out << ",z_lexical@" << gamma_label(g);
    out << '\n';
    for (const auto& r : table.rows) {
        out << r.doc_id << ',' << r.year << ',' << io::format_double(r.alpha_semantic) << ','
            << io::format_double(r.alpha_lexical) << ',' << io::format_double(r.z_semantic) << ','
            << io::format_double(r.z_lexical) << ',' << r.quantile_semantic << ',' << r.quantile_lexical;
        for (double v : r.z_semantic_by_gamma) out << ',' << io::format_double(v);
        for (double v : r.z_lexical_by_gamma) out << ',' << io::format_double(v);
        out << '\n';
    }
    io::write_atomic(path, out.str());
}

InfluenceTable read_features_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open features file " + path.string());
    InfluenceTable table;
    std::string line;
    bool header_seen = false;
    std::size_t n_gamma = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line.rfind("#schema=", 0) == 0) {
            if (line.rfind("#schema=features/", 0) != 0) throw DataError(path.string() + ": not a features file");
            continue;
        }
        if (line.rfind("#selected_gamma,", 0) == 0) {
            auto f = io::split(line, ',');
            table.gamma_semantic = io::parse_double(f.at(1), "gamma");
            table.gamma_lexical = io::parse_double(f.at(2), "gamma");
            continue;
        }
        if (line[0] == '#') continue;
        auto f = io::split(line, ',');
        if (!header_seen) {
            header_seen = true;
            if (f.size() < 8 || f[0] != "doc_id" || (f.size() - 8) % 2 != 0) {
                throw DataError(path.string() + ": bad features header");
            }
            n_gamma = (f.size() - 8) / 2;
            for (std::size_t g = 0; g < n_gamma; ++g) {
                const auto& name = f[8 + g];
                table.gammas.push_back(io::parse_double(name.substr(name.find('@') + 1), "gamma"));
            }
            continue;
        }
        if (f.size() != 8 + 2 * n_gamma) throw DataError(path.string() + ": bad features row '" + line + "'");
        InfluenceScore s;
        s.doc_id = f[0];
        s.year = static_cast<int>(io::parse_int(f[1], "year"));
        s.alpha_semantic = io::parse_double(f[2], "alpha_semantic");
        s.alpha_lexical = io::parse_double(f[3], "alpha_lexical");
        s.z_semantic = io::parse_double(f[4], "z_semantic");
        s.z_lexical = io::parse_double(f[5], "z_lexical");
        s.quantile_semantic = static_cast<int>(io::parse_int(f[6], "q_semantic"));
        s.quantile_lexical = static_cast<int>(io::parse_int(f[7], "q_lexical"));
        for (std::size_t g = 0; g < n_gamma; ++g) {
            s.z_semantic_by_gamma.push_back(io::parse_double(f[8 + g], "z"));
            s.z_lexical_by_gamma.push_back(io::parse_double(f[8 + n_gamma + g], "z"));
        }
        table.rows.push_back(std::move(s));
    }
    if (!header_seen) throw DataError(path.string() + ": empty features file");
    return table;
}

}  // namespace cinf
