#pragma once

#include "cinf/change_detect.hpp"

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace cinf {

struct CascadeEvent {
    int year = 0;
    std::string doc_id;

    friend auto operator<=>(const CascadeEvent&, const CascadeEvent&) = default;
};

// Time-ordered usages of one innovation; each event is marked by the
// document it appears in.
struct Cascade {
    std::string word;
    ChangeKind kind = ChangeKind::Semantic;
    int t_star = 0;
    std::vector<CascadeEvent> events;  // sorted by (year, doc_id)

    // n(t, w): events per year.
    std::map<int, std::size_t> counts_by_year() const;
};

void sort_events(Cascade& cascade);

// JSON lines: {"word","kind","t_star","events":[[year,doc_id],...]}, after a
// {"schema":"cascades/1"} header line.
void write_cascades_jsonl(std::span<const Cascade> cascades, const std::filesystem::path& path);
std::vector<Cascade> read_cascades_jsonl(const std::filesystem::path& path);

}  // namespace cinf
