#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "courtsim/debate_protocol.hpp"

namespace courtsim {

/// Trial records are stored one JSON object per line. Phase timings are not
/// part of the record so that identical runs produce identical files.
class RecordError : public std::runtime_error {
public:
    RecordError(const std::string& what, std::size_t line)
        : std::runtime_error(what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

nlohmann::json record_to_json(const TrialRecord& record);
TrialRecord record_from_json(const nlohmann::json& j);

std::string record_line(const TrialRecord& record);
void write_records(std::ostream& out, const std::vector<TrialRecord>& records);
void write_records(const std::filesystem::path& path, const std::vector<TrialRecord>& records);

/// Parses every non-empty line. Throws RecordError naming the 1-based line.
std::vector<TrialRecord> read_records(std::istream& in);
std::vector<TrialRecord> read_records(const std::filesystem::path& path);

void to_json(nlohmann::json& j, const Verdict& v);
void from_json(const nlohmann::json& j, Verdict& v);

}  // namespace courtsim
