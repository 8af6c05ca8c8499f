#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "qaforge/annotation.hpp"

namespace httplib {
class Server;
}

namespace qaforge::service {

enum class EventKind { DatasetLoaded, GroupsAssigned, AnnotationSubmitted, GoldResolved };

std::string_view to_string(EventKind k);
EventKind event_kind_from_string(std::string_view s);

struct EventLogEntry {
    std::uint64_t seq = 0;
    EventKind kind = EventKind::DatasetLoaded;
    nlohmann::json payload;
    std::string timestamp;
    bool operator==(const EventLogEntry&) const = default;
};

nlohmann::json to_json(const EventLogEntry& e);
EventLogEntry entry_from_json(const nlohmann::json& j);

// Test hook: terminate the process with _Exit at a point inside append().
enum class CrashPoint { None, BeforeWrite, MidWrite, AfterWrite };

struct FaultPlan {
    CrashPoint point = CrashPoint::None;
    std::uint64_t at_seq = 0;  // crash while appending this seq
    int exit_code = 86;
};

// Parses a log's contents. A final line without a trailing newline is a torn
// write and is dropped (reported via torn_bytes). Any other unparsable line or
// a break in the seq sequence throws DataError naming the seq.
struct ParsedLog {
    std::vector<EventLogEntry> entries;
    std::size_t valid_bytes = 0;
    std::size_t torn_bytes = 0;
};
ParsedLog parse_log(std::string_view contents);

// Append-only JSON-lines file; each append is fsynced before it returns.
class EventLog {
public:
    explicit EventLog(std::filesystem::path path);
    ~EventLog();
    EventLog(const EventLog&) = delete;
    EventLog& operator=(const EventLog&) = delete;

    // Entries present at open time, after dropping a torn tail.
    const std::vector<EventLogEntry>& recovered() const { return recovered_; }
    std::size_t dropped_torn_bytes() const { return torn_bytes_; }
    std::uint64_t last_seq() const { return last_seq_; }

    EventLogEntry append(EventKind kind, nlohmann::json payload, std::string timestamp);

    void inject_fault(FaultPlan plan) { fault_ = plan; }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    int fd_ = -1;
    std::vector<EventLogEntry> recovered_;
    std::size_t torn_bytes_ = 0;
    std::uint64_t last_seq_ = 0;
    FaultPlan fault_;
};

struct ServiceState {
    std::uint64_t last_seq = 0;
    bool loaded = false;
    std::vector<annotation::AnnotationTask> tasks;
    std::unordered_map<std::string, std::size_t> task_index;
    bool assigned = false;
    std::size_t group_size = 3;
    annotation::Assignment assignment;
    std::map<std::string, std::string> annotator_of_token;
    std::map<std::string, std::set<std::size_t>> done;  // annotator -> task indices
    std::map<std::size_t, std::vector<annotation::AnnotationRecord>> records;
    // Golds are derived when a task reaches quorum; gold_logged tracks which
    // of them also have their GOLD_RESOLVED audit entry.
    std::map<std::size_t, annotation::GoldLabel> golds;
    std::set<std::size_t> gold_logged;
    std::size_t submissions = 0;

    bool operator==(const ServiceState&) const = default;

    // Lowest-index task of the annotator's slices they have not annotated.
    std::optional<std::size_t> next_task(const std::string& annotator) const;
    bool is_assigned_to(const std::string& annotator, std::size_t task) const;
    std::vector<annotation::GoldLabel> gold_list() const;
};

// Applies one entry; throws DataError naming the seq if it does not fit.
void apply_event(ServiceState& state, const EventLogEntry& entry);
ServiceState recover_state(const std::vector<EventLogEntry>& entries);

struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::filesystem::path data_dir = "qaforge-data";
    std::string admin_token;
    std::optional<std::filesystem::path> static_dir;
};

// JSON keys: host, port, data_dir, admin_token, static_dir. Env overrides:
// QAFORGE_HOST, QAFORGE_PORT, QAFORGE_DATA_DIR, QAFORGE_ADMIN_TOKEN, QAFORGE_STATIC_DIR.
ServiceConfig load_service_config(const std::optional<std::filesystem::path>& path,
                                  const std::function<const char*(const char*)>& getenv = nullptr);

struct Response {
    int status = 200;
    std::string body;
    std::string content_type = "application/json";
    std::map<std::string, std::string> headers;
};

std::string random_token();  // 128 bits, hex

class AnnotationService {
public:
    explicit AnnotationService(ServiceConfig config);

    // `token` is the bearer token, empty if none was sent.
    Response get_task(const std::string& token) const;
    Response post_annotation(const std::string& token, const std::string& body);
    Response get_progress(const std::string& token) const;
    Response get_export(const std::string& token, const std::string& kind) const;
    Response admin_load(const std::string& token, const std::string& body);
    Response admin_assign(const std::string& token, const std::string& body);

    std::shared_ptr<const ServiceState> snapshot() const;
    EventLog& log() { return log_; }
    const ServiceConfig& config() const { return config_; }
    void set_clock(std::function<std::string()> clock) { clock_ = std::move(clock); }

private:
    bool is_admin(const std::string& token) const;
    // Appends under write_mutex_, applies to a copy and swaps the snapshot.
    void commit(ServiceState& next, EventKind kind, nlohmann::json payload);
    void publish(std::shared_ptr<const ServiceState> next);

    ServiceConfig config_;
    EventLog log_;
    std::function<std::string()> clock_;
    std::mutex write_mutex_;
    mutable std::mutex snapshot_mutex_;
    std::shared_ptr<const ServiceState> snapshot_;
};

void bind_routes(httplib::Server& server, AnnotationService& service);

// Blocks until the server stops.
void serve(const ServiceConfig& config);

}  // namespace qaforge::service
