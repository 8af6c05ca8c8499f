#include "qaforge/service.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <ctime>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include <httplib.h>

#include "qaforge/errors.hpp"

namespace qaforge::service {

using nlohmann::json;
namespace ann = qaforge::annotation;

std::string_view to_string(EventKind k) {
    switch (k) {
        case EventKind::DatasetLoaded: return "DATASET_LOADED";
        case EventKind::GroupsAssigned: return "GROUPS_ASSIGNED";
        case EventKind::AnnotationSubmitted: return "ANNOTATION_SUBMITTED";
        case EventKind::GoldResolved: return "GOLD_RESOLVED";
    }
    return "?";
}

EventKind event_kind_from_string(std::string_view s) {
    for (auto k : {EventKind::DatasetLoaded, EventKind::GroupsAssigned, EventKind::AnnotationSubmitted,
                   EventKind::GoldResolved}) {
        if (to_string(k) == s) return k;
    }
    throw DataError("unknown event kind: " + std::string(s));
}

json to_json(const EventLogEntry& e) {
    return {{"seq", e.seq}, {"kind", to_string(e.kind)}, {"payload", e.payload}, {"timestamp", e.timestamp}};
}

EventLogEntry entry_from_json(const json& j) {
    EventLogEntry e;
    e.seq = j.at("seq").get<std::uint64_t>();
    e.kind = event_kind_from_string(j.at("kind").get<std::string>());
    e.payload = j.at("payload");
    e.timestamp = j.at("timestamp").get<std::string>();
    return e;
}

ParsedLog parse_log(std::string_view contents) {
    ParsedLog out;
    std::uint64_t expected = 1;
    std::size_t pos = 0;
    while (pos < contents.size()) {
        const std::size_t nl = contents.find('\n', pos);
        if (nl == std::string_view::npos) {
            out.torn_bytes = contents.size() - pos;
            break;
        }
        EventLogEntry e;
        try {
            e = entry_from_json(json::parse(contents.substr(pos, nl - pos)));
        } catch (const std::exception& ex) {
            throw DataError("event log corrupt at seq " + std::to_string(expected) + ": " + ex.what());
        }
        if (e.seq != expected) {
            throw DataError("event log seq gap at seq " + std::to_string(e.seq) + " (expected " +
                            std::to_string(expected) + ")");
        }
        out.entries.push_back(std::move(e));
        ++expected;
        pos = nl + 1;
        out.valid_bytes = pos;
    }
    return out;
}

// ---------------------------------------------------------------------------

namespace {

[[noreturn]] void sys_fail(const std::string& what, const std::filesystem::path& p) {
    throw DataError(what + " " + p.string() + ": " + std::strerror(errno));
}

bool write_all(int fd, const char* data, std::size_t n) {
    while (n > 0) {
        const ssize_t w = ::write(fd, data, n);
        if (w < 0) {
            if (errno == EINTR) continue;
            return false;
        }
        data += w;
        n -= static_cast<std::size_t>(w);
    }
    return true;
}

void fsync_dir(const std::filesystem::path& dir) {
    const int fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY | O_CLOEXEC);
    if (fd < 0) return;
    ::fsync(fd);
    ::close(fd);
}

}  // namespace

EventLog::EventLog(std::filesystem::path path) : path_(std::move(path)) {
    const auto dir = path_.has_parent_path() ? path_.parent_path() : std::filesystem::path(".");
    std::filesystem::create_directories(dir);
    const bool existed = std::filesystem::exists(path_);
    std::size_t valid = 0;
    if (existed) {
        std::ifstream in(path_, std::ios::binary);
        if (!in) sys_fail("cannot read", path_);
        std::ostringstream buf;
        buf << in.rdbuf();
        ParsedLog parsed = parse_log(buf.str());
        recovered_ = std::move(parsed.entries);
        torn_bytes_ = parsed.torn_bytes;
        valid = parsed.valid_bytes;
        if (!recovered_.empty()) last_seq_ = recovered_.back().seq;
    }
    fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0600);
    if (fd_ < 0) sys_fail("cannot open", path_);
    if (torn_bytes_ > 0) {
        // An unacknowledged, partially written entry; never applied.
        if (::ftruncate(fd_, static_cast<off_t>(valid)) != 0 || ::fsync(fd_) != 0) sys_fail("cannot truncate", path_);
    }
    if (!existed) fsync_dir(dir);
}

EventLog::~EventLog() {
    if (fd_ >= 0) ::close(fd_);
}

EventLogEntry EventLog::append(EventKind kind, json payload, std::string timestamp) {
    EventLogEntry e{last_seq_ + 1, kind, std::move(payload), std::move(timestamp)};
    const std::string line = to_json(e).dump() + "\n";
    const bool armed = fault_.point != CrashPoint::None && fault_.at_seq == e.seq;

    if (armed && fault_.point == CrashPoint::BeforeWrite) std::_Exit(fault_.exit_code);
    if (armed && fault_.point == CrashPoint::MidWrite) {
        write_all(fd_, line.data(), line.size() / 2);
        ::fsync(fd_);
        std::_Exit(fault_.exit_code);
    }

    struct stat st {};
    if (::fstat(fd_, &st) != 0) sys_fail("cannot stat", path_);
    if (!write_all(fd_, line.data(), line.size()) || ::fsync(fd_) != 0) {
        const int saved = errno;
        // Leave no partial line behind for the next append to build on.
        [[maybe_unused]] const int rc = ::ftruncate(fd_, st.st_size);
        errno = saved;
        sys_fail("cannot append to", path_);
    }
    if (armed && fault_.point == CrashPoint::AfterWrite) std::_Exit(fault_.exit_code);
    last_seq_ = e.seq;
    return e;
}

// ---------------------------------------------------------------------------

std::optional<std::size_t> ServiceState::next_task(const std::string& annotator) const {
    if (!assigned) return std::nullopt;
    auto it = done.find(annotator);
    for (std::size_t t : assignment.tasks_for_annotator(annotator, tasks.size())) {
        if (it == done.end() || !it->second.contains(t)) return t;
    }
    return std::nullopt;
}

bool ServiceState::is_assigned_to(const std::string& annotator, std::size_t task) const {
    if (!assigned || task >= tasks.size()) return false;
    const auto& members = assignment.annotators_for_task(task);
    return std::find(members.begin(), members.end(), annotator) != members.end();
}

std::vector<ann::GoldLabel> ServiceState::gold_list() const {
    std::vector<ann::GoldLabel> out;
    for (const auto& [t, g] : golds) out.push_back(g);
    return out;
}

namespace {

void apply_unchecked(ServiceState& s, const EventLogEntry& e) {
    const json& p = e.payload;
    switch (e.kind) {
        case EventKind::DatasetLoaded: {
            if (s.loaded) throw DataError("dataset loaded twice");
            auto tasks = p.at("tasks").get<std::vector<ann::AnnotationTask>>();
            std::unordered_map<std::string, std::size_t> index;
            for (std::size_t i = 0; i < tasks.size(); ++i) {
                const auto& t = tasks[i];
                if (t.answer_text.empty() || t.answer_start > t.context.size() ||
                    t.context.compare(t.answer_start, t.answer_text.size(), t.answer_text) != 0) {
                    throw DataError("task " + t.pair_id + " is not extractive");
                }
                if (!index.emplace(t.pair_id, i).second) throw DataError("duplicate task id " + t.pair_id);
            }
            s.tasks = std::move(tasks);
            s.task_index = std::move(index);
            s.loaded = true;
            break;
        }
        case EventKind::GroupsAssigned: {
            if (!s.loaded) throw DataError("groups assigned before a dataset was loaded");
            if (s.assigned) throw DataError("groups assigned twice");
            ann::Assignment a;
            p.at("groups").get_to(a.groups);
            p.at("slice_size").get_to(a.slice_size);
            p.at("group_of_slice").get_to(a.group_of_slice);
            const auto group_size = p.at("group_size").get<std::size_t>();
            if (a.slice_size == 0 || a.groups.empty()) throw DataError("empty assignment");
            if (a.group_of_slice.size() != (s.tasks.size() + a.slice_size - 1) / a.slice_size) {
                throw DataError("assignment does not cover the dataset");
            }
            for (auto g : a.group_of_slice) {
                if (g >= a.groups.size()) throw DataError("slice assigned to a missing group");
            }
            std::set<std::string> seen;
            for (const auto& g : a.groups) {
                if (g.size() != group_size) throw DataError("group of the wrong size");
                for (const auto& id : g) {
                    if (!seen.insert(id).second) throw DataError("annotator in two groups: " + id);
                }
            }
            std::map<std::string, std::string> by_token;
            for (const auto& [annotator, token] : p.at("tokens").items()) {
                if (!seen.contains(annotator)) throw DataError("token for unknown annotator " + annotator);
                by_token.emplace(token.get<std::string>(), annotator);
            }
            if (by_token.size() != seen.size()) throw DataError("every annotator needs one distinct token");
            s.assignment = std::move(a);
            s.group_size = group_size;
            s.annotator_of_token = std::move(by_token);
            s.assigned = true;
            break;
        }
        case EventKind::AnnotationSubmitted: {
            auto r = p.at("record").get<ann::AnnotationRecord>();
            auto it = s.task_index.find(r.task_id);
            if (it == s.task_index.end()) throw DataError("submission for unknown task " + r.task_id);
            const std::size_t t = it->second;
            if (!s.is_assigned_to(r.annotator_id, t)) {
                throw DataError(r.annotator_id + " is not assigned to " + r.task_id);
            }
            if (!s.done[r.annotator_id].insert(t).second) {
                throw DataError(r.annotator_id + " annotated " + r.task_id + " twice");
            }
            if (!ann::validate_submission(r, s.tasks[t]).empty()) throw DataError("invalid submission logged");
            auto& records = s.records[t];
            records.push_back(std::move(r));
            ++s.submissions;
            if (records.size() == s.group_size) s.golds[t] = ann::majority_vote(records);
            break;
        }
        case EventKind::GoldResolved: {
            auto g = p.at("gold").get<ann::GoldLabel>();
            auto it = s.task_index.find(g.task_id);
            if (it == s.task_index.end()) throw DataError("gold for unknown task " + g.task_id);
            auto derived = s.golds.find(it->second);
            if (derived == s.golds.end() || !(derived->second == g)) {
                throw DataError("logged gold for " + g.task_id + " does not match the submissions");
            }
            if (!s.gold_logged.insert(it->second).second) throw DataError("gold logged twice for " + g.task_id);
            break;
        }
    }
}

}  // namespace

void apply_event(ServiceState& state, const EventLogEntry& entry) {
    if (entry.seq != state.last_seq + 1) {
        throw DataError("event log seq gap at seq " + std::to_string(entry.seq) + " (expected " +
                        std::to_string(state.last_seq + 1) + ")");
    }
    try {
        apply_unchecked(state, entry);
    } catch (const DataError& e) {
        throw DataError("event log entry seq " + std::to_string(entry.seq) + ": " + e.what());
    } catch (const std::exception& e) {
        throw DataError("event log entry seq " + std::to_string(entry.seq) + " is malformed: " + e.what());
    }
    state.last_seq = entry.seq;
}

ServiceState recover_state(const std::vector<EventLogEntry>& entries) {
    ServiceState s;
    for (const auto& e : entries) apply_event(s, e);
    return s;
}

// ---------------------------------------------------------------------------

ServiceConfig load_service_config(const std::optional<std::filesystem::path>& path,
                                  const std::function<const char*(const char*)>& getenv_fn) {
    ServiceConfig c;
    if (path) {
        std::ifstream in(*path);
        if (!in) throw ConfigError("cannot read service config " + path->string());
        json j;
        try {
            j = json::parse(in);
            if (j.contains("host")) j.at("host").get_to(c.host);
            if (j.contains("port")) j.at("port").get_to(c.port);
            if (j.contains("data_dir")) c.data_dir = j.at("data_dir").get<std::string>();
            if (j.contains("admin_token")) j.at("admin_token").get_to(c.admin_token);
            if (j.contains("static_dir")) c.static_dir = j.at("static_dir").get<std::string>();
        } catch (const json::exception& e) {
            throw ConfigError("bad service config " + path->string() + ": " + e.what());
        }
    }
    auto env = [&](const char* name) -> const char* { return getenv_fn ? getenv_fn(name) : std::getenv(name); };
    if (const char* v = env("QAFORGE_HOST")) c.host = v;
    if (const char* v = env("QAFORGE_PORT")) {
        char* end = nullptr;
        const long port = std::strtol(v, &end, 10);
        if (end == v || *end != '\0') throw ConfigError(std::string("QAFORGE_PORT is not a number: ") + v);
        c.port = static_cast<int>(port);
    }
    if (const char* v = env("QAFORGE_DATA_DIR")) c.data_dir = v;
    if (const char* v = env("QAFORGE_ADMIN_TOKEN")) c.admin_token = v;
    if (const char* v = env("QAFORGE_STATIC_DIR")) c.static_dir = v;
    if (c.port < 0 || c.port > 65535) throw ConfigError("port out of range: " + std::to_string(c.port));
    return c;
}

std::string random_token() {
    std::random_device rd;
    std::string out;
    static const char* hex = "0123456789abcdef";
    for (int i = 0; i < 4; ++i) {
        const std::uint32_t w = rd();
        for (int b = 7; b >= 0; --b) out += hex[(w >> (4 * b)) & 0xF];
    }
    return out;
}

namespace {

std::string utc_now() {
    const auto now = std::chrono::system_clock::now();
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[40];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
    char out[48];
    std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
    return out;
}

Response json_response(int status, const json& body) { return {status, body.dump(2) + "\n", "application/json", {}}; }

Response error(int status, const std::string& message) { return json_response(status, {{"error", message}}); }

}  // namespace

AnnotationService::AnnotationService(ServiceConfig config)
    : config_(std::move(config)), log_(config_.data_dir / "events.jsonl"), clock_(utc_now) {
    if (config_.admin_token.empty()) {
        throw ConfigError("an admin token is required (admin_token in the config or QAFORGE_ADMIN_TOKEN)");
    }
    ServiceState state = recover_state(log_.recovered());
    if (state.annotator_of_token.contains(config_.admin_token)) {
        throw ConfigError("the admin token collides with an annotator token");
    }
    // A crash between a quorum-reaching submission and its audit entry.
    for (const auto& [t, g] : state.golds) {
        if (state.gold_logged.contains(t)) continue;
        EventLogEntry e = log_.append(EventKind::GoldResolved, {{"gold", g}}, clock_());
        apply_event(state, e);
    }
    snapshot_ = std::make_shared<const ServiceState>(std::move(state));
}

std::shared_ptr<const ServiceState> AnnotationService::snapshot() const {
    std::lock_guard lock(snapshot_mutex_);
    return snapshot_;
}

void AnnotationService::publish(std::shared_ptr<const ServiceState> next) {
    std::lock_guard lock(snapshot_mutex_);
    snapshot_ = std::move(next);
}

bool AnnotationService::is_admin(const std::string& token) const {
    return !token.empty() && token == config_.admin_token;
}

void AnnotationService::commit(ServiceState& next, EventKind kind, json payload) {
    EventLogEntry e{log_.last_seq() + 1, kind, payload, clock_()};
    // Apply first so nothing the state would reject ever reaches the log.
    apply_event(next, e);
    log_.append(kind, std::move(payload), e.timestamp);
}

Response AnnotationService::get_task(const std::string& token) const {
    const auto s = snapshot();
    auto it = s->annotator_of_token.find(token);
    if (token.empty() || it == s->annotator_of_token.end()) return error(401, "unknown session token");
    const auto next = s->next_task(it->second);
    if (!next) return {204, "", "application/json", {}};
    const auto mine = s->assignment.tasks_for_annotator(it->second, s->tasks.size());
    const auto done = s->done.contains(it->second) ? s->done.at(it->second).size() : 0;
    return json_response(200, {{"task", s->tasks[*next]},
                               {"index", *next},
                               {"annotator_id", it->second},
                               {"assigned", mine.size()},
                               {"annotated", done}});
}

Response AnnotationService::post_annotation(const std::string& token, const std::string& body) {
    std::lock_guard write(write_mutex_);
    const auto cur = snapshot();
    auto tok = cur->annotator_of_token.find(token);
    if (token.empty() || tok == cur->annotator_of_token.end()) return error(401, "unknown session token");
    const std::string& annotator = tok->second;

    ann::AnnotationRecord record;
    try {
        json j = json::parse(body);
        if (j.contains("annotator_id") && !j.at("annotator_id").is_null() &&
            j.at("annotator_id").get<std::string>() != annotator) {
            return error(403, "annotator_id does not match the session");
        }
        record = j.get<ann::AnnotationRecord>();
    } catch (const std::exception& e) {
        return error(400, std::string("malformed annotation: ") + e.what());
    }
    record.annotator_id = annotator;
    record.timestamp = clock_();

    auto ti = cur->task_index.find(record.task_id);
    if (ti == cur->task_index.end() || !cur->is_assigned_to(annotator, ti->second)) {
        return error(403, "task " + record.task_id + " is not assigned to " + annotator);
    }
    const std::size_t t = ti->second;
    if (cur->done.contains(annotator) && cur->done.at(annotator).contains(t)) {
        return error(409, annotator + " already annotated " + record.task_id);
    }
    const auto violations = ann::validate_submission(record, cur->tasks[t]);
    if (!violations.empty()) {
        return json_response(422, {{"error", "validation failed"}, {"violations", violations}});
    }

    auto next = std::make_shared<ServiceState>(*cur);
    commit(*next, EventKind::AnnotationSubmitted, {{"record", record}});
    const std::uint64_t seq = next->last_seq;
    const bool resolved = next->golds.contains(t);
    publish(next);
    if (resolved) {
        // The gold already exists in state; a failed audit append is
        // backfilled on the next startup.
        auto audited = std::make_shared<ServiceState>(*next);
        try {
            commit(*audited, EventKind::GoldResolved, {{"gold", audited->golds.at(t)}});
            publish(std::move(audited));
        } catch (const DataError& e) {
            std::cerr << "qaforge: " << e.what() << "\n";
        }
    }
    return json_response(200, {{"accepted", true}, {"seq", seq}, {"gold_resolved", resolved}});
}

Response AnnotationService::get_progress(const std::string& token) const {
    if (!is_admin(token)) return error(401, "admin token required");
    const auto s = snapshot();
    json groups = json::array();
    if (s->assigned) {
        for (std::size_t g = 0; g < s->assignment.groups.size(); ++g) {
            std::size_t annotated = 0, assigned = 0;
            for (const auto& a : s->assignment.groups[g]) {
                assigned += s->assignment.tasks_for_annotator(a, s->tasks.size()).size();
                if (s->done.contains(a)) annotated += s->done.at(a).size();
            }
            groups.push_back({{"group", g},
                              {"annotators", s->assignment.groups[g]},
                              {"annotated", annotated},
                              {"assigned", assigned}});
        }
    }
    json votes = json::object();
    for (const auto& [t, records] : s->records) votes[s->tasks[t].pair_id] = records.size();
    json resolved = json::array();
    std::size_t unresolved = 0;
    for (const auto& [t, g] : s->golds) {
        resolved.push_back(s->tasks[t].pair_id);
        unresolved += g.resolution == ann::Resolution::Unresolved;
    }
    return json_response(200, {{"loaded", s->loaded},
                               {"tasks", s->tasks.size()},
                               {"assigned", s->assigned},
                               {"submissions", s->submissions},
                               {"groups", groups},
                               {"task_votes", votes},
                               {"golds_resolved", s->golds.size()},
                               {"golds_unresolved", unresolved},
                               {"resolved_tasks", resolved},
                               {"last_seq", s->last_seq}});
}

Response AnnotationService::get_export(const std::string& token, const std::string& kind) const {
    if (!is_admin(token)) return error(401, "admin token required");
    if (kind != "qa" && kind != "grammaticality") return error(404, "unknown export kind " + kind);
    const auto s = snapshot();
    const auto golds = s->gold_list();
    const bool any = std::any_of(golds.begin(), golds.end(),
                                 [](const ann::GoldLabel& g) { return g.resolution == ann::Resolution::Majority; });
    if (!any) return error(409, "no gold labels have been resolved yet");
    if (kind == "qa") {
        const auto exported = ann::export_qa_dataset(golds, s->tasks);
        Response r{200, canonical_squad(exported.dataset), "application/json", {}};
        r.headers["X-Qaforge-Count"] = std::to_string(exported.dataset.question_count());
        r.headers["X-Qaforge-Unresolved-Excluded"] = std::to_string(exported.unresolved_excluded);
        return r;
    }
    const auto rows = ann::export_grammaticality_dataset(golds, s->tasks);
    Response r{200, ann::grammaticality_tsv(rows), "text/tab-separated-values", {}};
    r.headers["X-Qaforge-Count"] = std::to_string(rows.size());
    return r;
}

Response AnnotationService::admin_load(const std::string& token, const std::string& body) {
    if (!is_admin(token)) return error(401, "admin token required");
    std::lock_guard write(write_mutex_);
    const auto cur = snapshot();
    if (cur->loaded) return error(409, "a dataset is already loaded");
    std::vector<ann::AnnotationTask> tasks;
    try {
        const json j = json::parse(body);
        if (j.contains("tasks")) {
            tasks = j.at("tasks").get<std::vector<ann::AnnotationTask>>();
        } else {
            tasks = ann::tasks_from_dataset(parse_squad(j));
        }
    } catch (const std::exception& e) {
        return error(400, std::string("cannot load dataset: ") + e.what());
    }
    if (tasks.empty()) return error(400, "the dataset has no answerable questions");
    auto next = std::make_shared<ServiceState>(*cur);
    try {
        commit(*next, EventKind::DatasetLoaded, {{"tasks", tasks}});
    } catch (const DataError& e) {
        return error(400, e.what());
    }
    publish(next);
    return json_response(200, {{"tasks", tasks.size()}, {"seq", next->last_seq}});
}

Response AnnotationService::admin_assign(const std::string& token, const std::string& body) {
    if (!is_admin(token)) return error(401, "admin token required");
    std::lock_guard write(write_mutex_);
    const auto cur = snapshot();
    if (!cur->loaded) return error(409, "load a dataset first");
    if (cur->assigned) return error(409, "groups are already assigned");
    ann::Assignment a;
    std::vector<std::string> annotators;
    std::size_t group_size = 3;
    try {
        const json j = json::parse(body);
        j.at("annotators").get_to(annotators);
        group_size = j.value("group_size", std::size_t{3});
        a = ann::assign_groups(cur->tasks.size(), annotators, group_size, j.value("slice_fraction", 0.02),
                               j.value("seed", std::uint64_t{0}));
    } catch (const std::exception& e) {
        return error(400, std::string("cannot assign groups: ") + e.what());
    }
    json tokens = json::object();
    std::set<std::string> used{config_.admin_token};
    for (const auto& id : annotators) {
        std::string t = random_token();
        while (!used.insert(t).second) t = random_token();
        tokens[id] = t;
    }
    const json payload{{"groups", a.groups},
                       {"slice_size", a.slice_size},
                       {"group_of_slice", a.group_of_slice},
                       {"group_size", group_size},
                       {"tokens", tokens}};
    auto next = std::make_shared<ServiceState>(*cur);
    commit(*next, EventKind::GroupsAssigned, payload);
    publish(next);
    return json_response(200, {{"tokens", tokens},
                               {"groups", a.groups},
                               {"slice_size", a.slice_size},
                               {"slices", a.slice_count()},
                               {"seq", next->last_seq}});
}

// ---------------------------------------------------------------------------

namespace {

std::string bearer(const httplib::Request& req) {
    const std::string h = req.get_header_value("Authorization");
    constexpr std::string_view prefix = "Bearer ";
    if (h.size() <= prefix.size() || h.compare(0, prefix.size(), prefix) != 0) return {};
    return h.substr(prefix.size());
}

void send(httplib::Response& res, const Response& r) {
    res.status = r.status;
    for (const auto& [k, v] : r.headers) res.set_header(k, v);
    if (r.status != 204) res.set_content(r.body, r.content_type);
}

}  // namespace

void bind_routes(httplib::Server& server, AnnotationService& svc) {
    server.Get("/api/task", [&](const httplib::Request& req, httplib::Response& res) {
        send(res, svc.get_task(bearer(req)));
    });
    server.Post("/api/annotation", [&](const httplib::Request& req, httplib::Response& res) {
        send(res, svc.post_annotation(bearer(req), req.body));
    });
    server.Get("/api/progress", [&](const httplib::Request& req, httplib::Response& res) {
        send(res, svc.get_progress(bearer(req)));
    });
    server.Get(R"(/api/export/([a-z]+))", [&](const httplib::Request& req, httplib::Response& res) {
        send(res, svc.get_export(bearer(req), req.matches[1]));
    });
    server.Post("/api/admin/load", [&](const httplib::Request& req, httplib::Response& res) {
        send(res, svc.admin_load(bearer(req), req.body));
    });
    server.Post("/api/admin/assign", [&](const httplib::Request& req, httplib::Response& res) {
        send(res, svc.admin_assign(bearer(req), req.body));
    });
    if (svc.config().static_dir && !server.set_mount_point("/", svc.config().static_dir->string())) {
        throw ConfigError("static directory does not exist: " + svc.config().static_dir->string());
    }
}

void serve(const ServiceConfig& config) {
    AnnotationService svc(config);
    httplib::Server server;
    bind_routes(server, svc);
    if (!server.bind_to_port(config.host, config.port)) {
        throw ConfigError("cannot listen on " + config.host + ":" + std::to_string(config.port));
    }
    std::cerr << "qaforge: annotation service on http://" << config.host << ":" << config.port << " (log "
              << svc.log().path().string() << ", " << svc.snapshot()->last_seq << " events)\n";
    server.listen_after_bind();
}

}  // namespace qaforge::service
