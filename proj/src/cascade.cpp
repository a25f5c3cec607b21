#include "cinf/cascade.hpp"

#include "cinf/error.hpp"
#include "cinf/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace cinf {

std::map<int, std::size_t> Cascade::counts_by_year() const {
    std::map<int, std::size_t> out;
    for (const auto& e : events) ++out[e.year];
    return out;
}

void sort_events(Cascade& cascade) { std::sort(cascade.events.begin(), cascade.events.end()); }

void write_cascades_jsonl(std::span<const Cascade> cascades, const std::filesystem::path& path) {
    std::ostringstream out;
    out << nlohmann::json{{"schema", "cascades/1"}}.dump() << '\n';
    for (const auto& c : cascades) {
        nlohmann::json events = nlohmann::json::array();
        for (const auto& e : c.events) events.push_back(nlohmann::json::array({e.year, e.doc_id}));
        nlohmann::json record{
            {"word", c.word}, {"kind", to_string(c.kind)}, {"t_star", c.t_star}, {"events", std::move(events)}};
        out << record.dump() << '\n';
    }
    io::write_atomic(path, out.str());
}

std::vector<Cascade> read_cascades_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open cascades file " + path.string());
    std::vector<Cascade> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = path.string() + ":" + std::to_string(line_no);
        try {
            auto record = nlohmann::json::parse(line);
            if (record.contains("schema")) {
                if (record["schema"].get<std::string>().rfind("cascades/", 0) != 0) {
                    throw DataError(where + ": not a cascades file");
                }
                continue;
            }
            Cascade c;
            c.word = record.at("word").get<std::string>();
            c.kind = parse_change_kind(record.at("kind").get<std::string>());
            c.t_star = record.at("t_star").get<int>();
            for (const auto& e : record.at("events")) {
                c.events.push_back({e.at(0).get<int>(), e.at(1).is_string() ? e.at(1).get<std::string>()
                                                                           : e.at(1).dump()});
            }
            sort_events(c);
            out.push_back(std::move(c));
        } catch (const nlohmann::json::exception& e) {
            throw DataError(where + ": malformed cascade record: " + e.what());
        }
    }
    return out;
}

}  // namespace cinf
