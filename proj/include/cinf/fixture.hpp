#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace cinf {

// Synthetic end-to-end corpus: documents whose filler text surrounds planted
// semantic innovations (a word whose embedding switches sense) and lexical
// innovations (a word that appears out of nowhere). Usage events of both
// kinds follow a discrete Hawkes process with per-document excitation, and
// future citations grow with the planted semantic excitation.
struct FixtureSpec {
    int first_year = 2000;
    int last_year = 2019;
    std::size_t docs_per_year = 5;
    std::uint32_t dim = 8;
    std::size_t filler_words = 60;
    std::size_t filler_tokens_per_doc = 80;
    std::size_t semantic_words = 300;
    std::size_t lexical_words = 12;
    std::size_t topics = 3;
    double influential_fraction = 0.2;
    double alpha_influential = 1.2;
    double alpha_background = 0.05;
    double hawkes_gamma = 1.0;
    double base_rate = 1.0;
    double sense_separation = 4.0;  // per component, in units of the noise sd
    double citation_effect = 1.0;   // multiplies planted semantic alpha in the future rate
    std::uint64_t seed = 7;
};

struct FixtureTruth {
    std::vector<std::string> doc_ids;
    std::vector<int> years;
    std::vector<double> alpha_semantic;
    std::vector<double> alpha_lexical;
    std::vector<std::string> semantic_words;
    std::vector<int> semantic_start;  // first year of the new sense
    std::vector<std::string> lexical_words;
};

struct FixtureFiles {
    std::filesystem::path corpus;     // corpus.jsonl
    std::filesystem::path store;      // embeddings.cemb
    std::filesystem::path citations;  // citations.csv
    std::filesystem::path topics;     // topics.csv
    std::filesystem::path config;     // pipeline.json
};

// Writes the fixture files and a pipeline config whose work directory is
// `dir/work`. Deterministic for a given spec.
FixtureFiles write_fixture(const std::filesystem::path& dir, const FixtureSpec& spec = {},
                           FixtureTruth* truth = nullptr);

}  // namespace cinf
