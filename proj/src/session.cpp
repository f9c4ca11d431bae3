#include "hrc/session.hpp"

#include "hrc/errors.hpp"

#include <algorithm>
#include <cmath>

namespace hrc {

using nlohmann::json;

namespace {

constexpr std::size_t kMaxFrames = 20000;

json vec(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json motions_json(const std::vector<MotionFunction>& motions)
{
    json out = json::array();
    for (const auto& m : motions) {
        out.push_back(m.str());
    }
    return out;
}

}  // namespace

const char* to_string(Phase phase) noexcept
{
    switch (phase) {
    case Phase::idle: return "idle";
    case Phase::planning: return "planning";
    case Phase::executing: return "executing";
    case Phase::paused: return "paused";
    case Phase::demonstrating: return "demonstrating";
    case Phase::fitting: return "fitting";
    case Phase::awaiting_clarification: return "awaiting_clarification";
    }
    return "unknown";
}

const std::vector<Transition>& Session::declared_transitions()
{
    using P = Phase;
    static const std::vector<Transition> table = [] {
        std::vector<Transition> t{
            {P::idle, "submit", P::planning},
            {P::planning, "planned", P::executing},
            {P::planning, "needs_clarification", P::awaiting_clarification},
            {P::planning, "not_executable", P::idle},
            {P::awaiting_clarification, "clarify", P::planning},
            {P::awaiting_clarification, "clarify", P::awaiting_clarification},
            {P::awaiting_clarification, "cancel", P::idle},
            {P::executing, "step", P::executing},
            {P::executing, "step", P::idle},
            {P::executing, "pause", P::paused},
            {P::executing, "cancel", P::idle},
            {P::paused, "resume", P::executing},
            {P::paused, "begin_demo", P::demonstrating},
            {P::paused, "cancel", P::idle},
            {P::demonstrating, "demo_sample", P::demonstrating},
            {P::demonstrating, "demo_sample", P::paused},
            {P::demonstrating, "stream_gap", P::paused},
            {P::demonstrating, "end_demo", P::fitting},
            {P::demonstrating, "end_demo", P::paused},
            {P::demonstrating, "cancel", P::paused},
            {P::fitting, "commit", P::fitting},
            {P::fitting, "resume", P::executing},
            {P::fitting, "cancel", P::paused},
        };
        for (auto p : {P::idle, P::executing, P::paused, P::demonstrating, P::fitting, P::awaiting_clarification}) {
            t.push_back({p, "reset", P::idle});
        }
        return t;
    }();
    return table;
}

Session::Session(Scene scene, std::shared_ptr<DmpLibrary> library, std::shared_ptr<LanguageBackend> backend,
                 PromptContext prompts, SessionConfig config)
    : initial_scene_(scene),
      library_(library ? std::move(library) : std::make_shared<DmpLibrary>()),
      planner_(std::move(backend), std::move(prompts)),
      config_(std::move(config)),
      detector_(config_.detector),
      rng_(config_.seed),
      sim_(std::move(scene), library_.get(), config_.sim)
{
    world_.scene = &sim_.scene();
}

void Session::require(std::initializer_list<Phase> phases, const char* command) const
{
    if (std::find(phases.begin(), phases.end(), phase_) == phases.end()) {
        throw Error(ErrorKind::illegal_transition,
                    std::string(command) + " is not allowed while " + to_string(phase_));
    }
}

void Session::transition(const char* command, Phase to)
{
    const Transition t{phase_, command, to};
    const auto& table = declared_transitions();
    if (std::find(table.begin(), table.end(), t) == table.end()) {
        throw std::logic_error(std::string("undeclared transition ") + to_string(phase_) + " --" + command + "--> " +
                               to_string(to));
    }
    transitions_.push_back(t);
    phase_ = to;
    emit(state_json());
}

void Session::emit(json frame)
{
    frames_.push_back(std::move(frame));
    if (frames_.size() > kMaxFrames) {
        const std::size_t drop = frames_.size() - kMaxFrames;
        frames_.erase(frames_.begin(), frames_.begin() + static_cast<long>(drop));
        frames_base_ += drop;
    }
}

void Session::emit_log(const std::string& level, const std::string& message)
{
    emit({{"type", "log"}, {"level", level}, {"message", message}, {"t", sim_.time()}});
}

void Session::emit_new_events()
{
    const auto& events = sim_.events();
    for (; events_seen_ < events.size(); ++events_seen_) {
        json frame = json::parse(event_to_json(events[events_seen_]));
        frame["type"] = "scene_delta";
        emit(std::move(frame));
    }
}

std::vector<json> Session::frames_since(std::size_t seq) const
{
    std::vector<json> out;
    for (std::size_t i = std::max(seq, frames_base_); i < frame_count(); ++i) {
        json f = frames_[i - frames_base_];
        f["seq"] = i;
        out.push_back(std::move(f));
    }
    return out;
}

// ---------------------------------------------------------------------------

Reply Session::submit(const std::string& text)
{
    require({Phase::idle}, "submit");
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
        throw Error(ErrorKind::invalid_input, "task text is empty");
    }
    task_ = text;
    choices_.clear();
    pending_question_.reset();
    plan_.reset();
    transition("submit", Phase::planning);
    perceived_ = localize(detector_.detect(sim_.scene(), rng_), sim_.scene());
    world_.objects = perceived_;
    task_before_ = sim_.scene();
    return plan_task();
}

Reply Session::plan_task()
{
    PlanResult r;
    try {
        r = planner_.plan(task_, world_, *library_, choices_);
    } catch (const Error& e) {
        r.status = PlanStatus::parse_error;
        r.message = e.what();
    }
    switch (r.status) {
    case PlanStatus::ok:
        plan_ = std::move(r.plan);
        cursor_ = {};
        transition("planned", Phase::executing);
        emit_log("info", "plan ready: " + std::to_string(plan_->subtasks.size()) + " sub-task(s)");
        return {true, format_plan_dsl(plan_->subtasks)};
    case PlanStatus::clarification:
        ambiguous_name_ = r.ambiguous_name;
        pending_question_ = kClarificationQuestion;
        transition("needs_clarification", Phase::awaiting_clarification);
        emit({{"type", "question"}, {"text", *pending_question_}, {"name", ambiguous_name_}});
        return {true, *pending_question_};
    default: break;
    }
    last_task_ = TaskRecord{task_, "not_executable", std::string(to_string(r.status)) + ": " + r.message};
    transition("not_executable", Phase::idle);
    emit_log("error", last_task_->reason);
    return {false, last_task_->reason};
}

Reply Session::clarify(const std::string& answer)
{
    require({Phase::awaiting_clarification}, "clarify");
    const auto label = resolve_choice(answer, ambiguous_name_, world_);
    if (!label) {
        transition("clarify", Phase::awaiting_clarification);
        emit({{"type", "question"}, {"text", *pending_question_}, {"name", ambiguous_name_}});
        return {false, "answer does not name a " + ambiguous_name_};
    }
    choices_[ambiguous_name_] = *label;
    pending_question_.reset();
    transition("clarify", Phase::planning);
    return plan_task();
}

void Session::pause()
{
    require({Phase::executing}, "pause");
    transition("pause", Phase::paused);
}

SubTask Session::basic_subtask(const SubTask& sub) const
{
    SubTask basic = sub;
    if (sub.skill_name) {
        if (const SkillRecord* skill = library_->skill(*sub.skill_name)) {
            basic.motions = skill->replaced_motions;
        }
        basic.skill_name.reset();
        basic.anchor.reset();
    }
    return basic;
}

void Session::recompile_current()
{
    if (!plan_ || cursor_.subtask >= plan_->subtasks.size()) {
        return;
    }
    SubTask& sub = plan_->subtasks[cursor_.subtask];
    if (sub.skill_name) {
        return;
    }
    SubTask updated = planner_.substitute(sub, *library_);
    if (updated.skill_name) {
        sub = std::move(updated);
        cursor_.motion = 0;
        emit_log("info", "sub-task '" + sub.description + "' now uses skill " + *sub.skill_name);
    }
}

void Session::resume()
{
    require({Phase::paused, Phase::fitting}, "resume");
    if (phase_ == Phase::fitting && !committed_) {
        throw Error(ErrorKind::illegal_transition, "resume is not allowed while fitting before a commit");
    }
    recording_.reset();
    demo_snapshot_.reset();
    committed_ = false;
    recompile_current();
    transition("resume", Phase::executing);
}

void Session::finish(const std::string& status, const std::string& reason)
{
    last_task_ = TaskRecord{task_, status, reason};
    transition("step", Phase::idle);
    emit_log(status == "success" ? "info" : "error", "task " + status + (reason.empty() ? "" : ": " + reason));
}

bool Session::step()
{
    require({Phase::executing}, "step");
    const Plan& plan = *plan_;
    if (cursor_.subtask >= plan.subtasks.size()) {
        finish("success", {});
        return false;
    }
    const SubTask& sub = plan.subtasks[cursor_.subtask];
    const MotionResult r = sim_.execute(sub.motions[cursor_.motion], plan, sub);
    emit_new_events();
    if (!r.ok) {
        finish("failed", sub.description + ": " + r.motion.str() + ": " + r.reason);
        return false;
    }
    if (++cursor_.motion < sub.motions.size()) {
        transition("step", Phase::executing);
        return true;
    }
    try {
        if (!check_success(sub.description, task_before_, sim_.scene(), choices_, &sim_.robot())) {
            finish("failed", "sub-task '" + sub.description + "' did not reach its goal");
            return false;
        }
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::unknown_predicate && e.kind() != ErrorKind::unresolved_symbol) {
            finish("failed", e.what());
            return false;
        }
    }
    cursor_ = {cursor_.subtask + 1, 0};
    if (cursor_.subtask < plan.subtasks.size()) {
        transition("step", Phase::executing);
        return true;
    }
    bool ok = false;
    std::string reason;
    try {
        ok = check_success(plan.task_text, task_before_, sim_.scene(), choices_, &sim_.robot());
        reason = ok ? "" : "task goal not reached";
    } catch (const Error& e) {
        reason = e.what();
    }
    finish(ok ? "success" : "failed", reason);
    return false;
}

void Session::run(std::size_t max_steps)
{
    for (std::size_t i = 0; i < max_steps && phase_ == Phase::executing; ++i) {
        step();
    }
}

void Session::begin_demo()
{
    require({Phase::paused}, "begin_demo");
    demo_snapshot_ = sim_.save();
    DemonstrationRecording rec;
    rec.id = "rec-" + std::to_string(++recording_counter_);
    if (plan_ && cursor_.subtask < plan_->subtasks.size()) {
        const SubTask basic = basic_subtask(plan_->subtasks[cursor_.subtask]);
        rec.subject_subtask = basic.description;
        try {
            rec.proposed_skill_name = skill_name(basic.description, basic.motions);
        } catch (const Error&) {
        }
    }
    recording_ = std::move(rec);
    last_received_.reset();
    committed_ = false;
    transition("begin_demo", Phase::demonstrating);
    emit_log("info", "recording " + recording_->id + " for '" + recording_->subject_subtask + "'");
}

void Session::discard_demo()
{
    if (demo_snapshot_) {
        sim_.restore(*demo_snapshot_);
    }
    demo_snapshot_.reset();
    recording_.reset();
    committed_ = false;
}

Reply Session::demo_sample(const DemoSample& sample, std::optional<double> received_at)
{
    require({Phase::demonstrating}, "demo_sample");
    auto& samples = recording_->samples;
    if (!sample.p.allFinite() || !std::isfinite(sample.t) || !std::isfinite(sample.aperture)) {
        throw Error(ErrorKind::invalid_input, "demo sample must be finite");
    }
    if (!samples.empty()) {
        if (sample.t <= samples.back().t) {
            transition("demo_sample", Phase::demonstrating);
            return {false, "sample timestamps must increase"};
        }
        std::string abort;
        if (sample.t - samples.back().t > config_.gap_limit_s) {
            abort = "stream gap above " + std::to_string(config_.gap_limit_s) + " s";
        } else if (sample.t - samples.front().t > config_.max_demo_s) {
            abort = "demonstration longer than " + std::to_string(config_.max_demo_s) + " s";
        }
        if (!abort.empty()) {
            discard_demo();
            transition("demo_sample", Phase::paused);
            emit_log("error", "recording aborted: " + abort);
            return {false, abort};
        }
    }
    std::string warning;
    const Scene before = sim_.scene();
    sim_.mirror(sample.p, sample.aperture, &warning);
    sim_.log_event("demo_sample", before);
    emit_new_events();
    samples.push_back({sample.t, sim_.robot().ee, sample.aperture});
    last_received_ = received_at.value_or(sample.t);
    if (!warning.empty()) {
        recording_->warnings.push_back(warning);
        emit_log("warning", warning);
    }
    transition("demo_sample", Phase::demonstrating);
    return {true, warning};
}

bool Session::check_stream_gap(double now)
{
    if (phase_ != Phase::demonstrating || !last_received_ || now - *last_received_ <= config_.gap_limit_s) {
        return false;
    }
    discard_demo();
    transition("stream_gap", Phase::paused);
    emit_log("error", "recording aborted: stream gap above " + std::to_string(config_.gap_limit_s) + " s");
    return true;
}

Reply Session::end_demo()
{
    require({Phase::demonstrating}, "end_demo");
    if (recording_->samples.size() < 3) {
        const std::string why = "a recording needs at least 3 samples, got " + std::to_string(recording_->samples.size());
        discard_demo();
        transition("end_demo", Phase::paused);
        emit_log("error", why);
        return {false, why};
    }
    transition("end_demo", Phase::fitting);
    return {true, recording_->id};
}

Reply Session::commit(const std::string& recording_id, const std::optional<std::string>& name, bool replace)
{
    require({Phase::fitting}, "commit");
    Reply reply;
    try {
        if (committed_) {
            throw Error(ErrorKind::library, "recording " + recording_->id + " is already committed");
        }
        if (recording_id != recording_->id) {
            throw Error(ErrorKind::invalid_input, "unknown recording '" + recording_id + "'");
        }
        const SubTask basic = basic_subtask(plan_->subtasks[cursor_.subtask]);
        const auto anchor = anchor_symbol(basic.motions);
        std::optional<Vec3> anchor_position;
        if (anchor) {
            if (auto c = sim_.scene().constant(*anchor)) {
                anchor_position = c;
            } else if (auto it = plan_->bound_symbols.find(*anchor); it != plan_->bound_symbols.end()) {
                anchor_position = it->second;
            }
        }
        if (!anchor_position) {
            throw Error(ErrorKind::naming, "sub-task '" + basic.description + "' has no anchor position");
        }
        TaughtSkill taught = teach_skill(basic, recording_->samples, *anchor_position);
        if (std::all_of(taught.models.begin(), taught.models.end(),
                        [](const auto& m) { return m.second.all_degenerate(); })) {
            throw Error(ErrorKind::invalid_input, "recording is stationary: every dimension is degenerate");
        }
        if (name && *name != taught.skill.name) {
            const std::string old = taught.skill.name;
            auto rename = [&](std::string& s) { s = *name + s.substr(old.size()); };
            for (auto& m : taught.models) rename(m.first);
            for (auto& m : taught.skill.motions) rename(m.arg);
            taught.skill.name = *name;
        }
        taught.skill.created_from = recording_->id;
        library_->commit(taught.skill, taught.models, replace);
        committed_ = true;
        sim_.restore(*demo_snapshot_);
        reply = {true, taught.skill.name};
        emit_log("info", "stored skill " + taught.skill.name + " (" + std::to_string(taught.models.size()) + " model(s))");
    } catch (const Error& e) {
        reply = {false, e.what()};
        emit_log("error", std::string("commit refused: ") + e.what());
    }
    transition("commit", Phase::fitting);
    return reply;
}

void Session::cancel()
{
    require({Phase::awaiting_clarification, Phase::executing, Phase::paused, Phase::demonstrating, Phase::fitting},
            "cancel");
    switch (phase_) {
    case Phase::demonstrating:
    case Phase::fitting:
        discard_demo();
        transition("cancel", Phase::paused);
        return;
    case Phase::awaiting_clarification:
        pending_question_.reset();
        last_task_ = TaskRecord{task_, "clarification_cancelled", {}};
        break;
    default: last_task_ = TaskRecord{task_, "cancelled", {}}; break;
    }
    transition("cancel", Phase::idle);
}

void Session::reset()
{
    require({Phase::idle, Phase::executing, Phase::paused, Phase::demonstrating, Phase::fitting,
             Phase::awaiting_clarification},
            "reset");
    sim_ = Simulator(initial_scene_, library_.get(), config_.sim);
    world_.scene = &sim_.scene();
    world_.objects.clear();
    rng_.seed(config_.seed);
    events_seen_ = 0;
    plan_.reset();
    cursor_ = {};
    choices_.clear();
    pending_question_.reset();
    demo_snapshot_.reset();
    recording_.reset();
    committed_ = false;
    transition("reset", Phase::idle);
}

// ---------------------------------------------------------------------------

json plan_to_json(const Plan& plan)
{
    json subtasks = json::array();
    for (const auto& s : plan.subtasks) {
        json js{{"description", s.description}, {"motions", motions_json(s.motions)}};
        if (s.skill_name) js["skill_name"] = *s.skill_name;
        if (s.anchor) js["anchor"] = *s.anchor;
        subtasks.push_back(std::move(js));
    }
    json bound = json::object();
    for (const auto& [k, v] : plan.bound_symbols) {
        bound[k] = vec(v);
    }
    return {{"task", plan.task_text},
            {"horizon", plan.horizon == Horizon::long_horizon ? "long" : "short"},
            {"subtasks", subtasks},
            {"bound_symbols", bound},
            {"symbol_labels", plan.symbol_labels},
            {"dsl", format_plan_dsl(plan.subtasks)}};
}

json Session::state_json() const
{
    json j{{"type", "state"},
           {"phase", to_string(phase_)},
           {"cursor", {{"subtask", cursor_.subtask}, {"motion", cursor_.motion}}},
           {"pending_question", pending_question_ ? json(*pending_question_) : json(nullptr)},
           {"task", task_},
           {"sim_time", sim_.time()}};
    if (last_task_) {
        j["last_task"] = {{"task", last_task_->task}, {"status", last_task_->status}, {"reason", last_task_->reason}};
    }
    if (recording_) {
        j["recording"] = {{"id", recording_->id},
                          {"samples", recording_->samples.size()},
                          {"subject_subtask", recording_->subject_subtask},
                          {"proposed_skill_name", recording_->proposed_skill_name},
                          {"warnings", recording_->warnings},
                          {"committed", committed_}};
    }
    return j;
}

json Session::plan_json() const { return plan_ ? plan_to_json(*plan_) : json(nullptr); }

json Session::scene_json() const
{
    json j = json::parse(scene_to_json(sim_.scene()));
    const auto& r = sim_.robot();
    j["robot_state"] = {{"base", vec(r.base)},
                        {"ee", vec(r.ee)},
                        {"aperture", r.aperture},
                        {"held", r.held ? json(*r.held) : json(nullptr)},
                        {"waist", r.waist_angle}};
    json perceived = json::array();
    for (const auto& o : perceived_) {
        perceived.push_back({{"label", o.label}, {"name", o.name}, {"position", vec(o.position_world)}});
    }
    j["perceived"] = perceived;
    return j;
}

json Session::library_json() const
{
    json entries = json::array();
    for (const auto& e : library_->entries()) {
        entries.push_back(
            {{"name", e.name}, {"file", e.file}, {"created_at", e.created_at}, {"version", e.version}, {"kind", e.kind}});
    }
    json skills = json::array();
    for (const auto& n : library_->skill_names()) {
        const SkillRecord* s = library_->skill(n);
        skills.push_back({{"name", s->name},
                          {"subtask", s->subtask},
                          {"motions", motions_json(s->motions)},
                          {"replaced_motions", motions_json(s->replaced_motions)},
                          {"anchor", s->anchor ? json(*s->anchor) : json(nullptr)},
                          {"created_from", s->created_from}});
    }
    return {{"entries", entries}, {"skills", skills}};
}

}  // namespace hrc
