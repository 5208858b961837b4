#include "arlb/autorl_env.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <fstream>

#include "arlb/checkpoint.hpp"
#include "arlb/csv.hpp"

namespace arlb {

namespace {

StateFeatures features_of(const Metrics& metrics) {
    StateFeatures features;
    if (metrics.updates() > 0) {
        features.grad_norm_mean = mean_of(metrics.grad_norms);
        features.grad_norm_var = variance_of(metrics.grad_norms);
        features.loss_mean = mean_of(metrics.losses);
    }
    return features;
}

}  // namespace

AutoRLSession::AutoRLSession(AutoRLEnvConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)), seed_(seed) {
    env_spec(cfg_.env_name);  // throws for unknown environments
    if (cfg_.total_budget < 1) throw ConfigError("autorl session: total_budget must be >= 1");
    if (cfg_.n_eval_episodes < 1) throw ConfigError("autorl session: n_eval_episodes must be >= 1");
    if (cfg_.mode == SessionMode::Dynamic && cfg_.checkpoint_dir.empty())
        throw ConfigError("autorl session: dynamic mode requires a checkpoint directory");
    if (!cfg_.checkpoint_dir.empty()) {
        std::filesystem::create_directories(cfg_.checkpoint_dir);
        const auto lock = cfg_.checkpoint_dir / "session.lock";
        const int fd = ::open(lock.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd < 0)
            throw ConfigError("autorl session: directory '" + cfg_.checkpoint_dir.string() +
                              "' is locked by another session");
        ::close(fd);
        lock_held_ = true;
    }
}

AutoRLSession::~AutoRLSession() {
    if (lock_held_) {
        std::error_code ec;
        std::filesystem::remove(cfg_.checkpoint_dir / "session.lock", ec);
    }
}

std::pair<Objectives, StateFeatures> AutoRLSession::step(const Configuration& lambda, long budget) {
    if (budget < 1) throw ConfigError("autorl step: budget must be >= 1");

    Objectives objectives;
    StateFeatures features;
    const double floor = env_spec(cfg_.env_name).divergence_floor;

    if (cfg_.mode == SessionMode::Static) {
        state_.emplace(init(cfg_.algo, lambda, cfg_.env_name, seed_, cfg_.total_budget));
        diverged_latch_ = false;
    } else {
        if (consumed_ + budget > cfg_.total_budget)
            throw ConfigError("autorl step: cumulative budget " + std::to_string(consumed_ + budget) +
                              " exceeds total_budget " + std::to_string(cfg_.total_budget));
        if (!state_)
            state_.emplace(init(cfg_.algo, lambda, cfg_.env_name, seed_, cfg_.total_budget));
        else
            apply_config(*state_, lambda);
    }

    if (diverged_latch_) {
        objectives.mean_return = floor;
        objectives.diverged = true;
        consumed_ += budget;  // the slice is forfeited, not retried
        ++step_index_;
        log_step(lambda, budget, objectives, features);
        return {objectives, features};
    }

    const long before = state_->step_count;
    const auto t0 = std::chrono::steady_clock::now();
    Metrics metrics;
    bool diverged = false;
    try {
        metrics = train(*state_, budget);
    } catch (const TrainingDiverged& e) {
        metrics = e.last_metrics;
        diverged = true;
    }
    const auto t1 = std::chrono::steady_clock::now();
    consumed_ += state_->step_count - before;

    objectives.diverged = diverged;
    if (cfg_.want_runtime)
        objectives.runtime_seconds = std::chrono::duration<double>(t1 - t0).count();
    if (diverged) {
        objectives.mean_return = floor;
        if (cfg_.mode == SessionMode::Dynamic) diverged_latch_ = true;
    } else {
        objectives.mean_return =
            evaluate(*state_, cfg_.n_eval_episodes, derive_seed(seed_, "eval"));
    }
    if (cfg_.want_features) features = features_of(metrics);

    ++step_index_;
    log_step(lambda, budget, objectives, features);
    return {objectives, features};
}

std::filesystem::path AutoRLSession::checkpoint_path(const std::string& id) const {
    return cfg_.checkpoint_dir / id;
}

std::string AutoRLSession::checkpoint(const std::string& tag) {
    if (cfg_.mode != SessionMode::Dynamic)
        throw ConfigError("checkpoint: unsupported in static mode");
    if (!state_) throw ConfigError("checkpoint: no training state yet (step first)");
    std::string id = "ckpt-" + std::to_string(checkpoint_counter_++);
    if (!tag.empty()) id += "-" + tag;
    save_checkpoint(*state_, checkpoint_path(id));
    return id;
}

void AutoRLSession::restore(const std::string& id) {
    if (cfg_.mode != SessionMode::Dynamic) throw ConfigError("restore: unsupported in static mode");
    restore_from(checkpoint_path(id));
}

void AutoRLSession::restore_from(const std::filesystem::path& checkpoint_path_arg) {
    if (!std::filesystem::exists(checkpoint_path_arg / "manifest.json"))
        throw IoError("restore: unknown checkpoint '" + checkpoint_path_arg.string() + "'");
    state_.emplace(load_checkpoint(checkpoint_path_arg));
    consumed_ = state_->step_count;
    diverged_latch_ = false;
}

std::string AutoRLSession::duplicate(const std::string& id) {
    if (cfg_.mode != SessionMode::Dynamic) throw ConfigError("duplicate: unsupported in static mode");
    const auto src = checkpoint_path(id);
    if (!std::filesystem::exists(src / "manifest.json"))
        throw IoError("duplicate: unknown checkpoint '" + id + "'");
    const std::string new_id = "ckpt-" + std::to_string(checkpoint_counter_++) + "-dup";
    std::filesystem::copy(src, checkpoint_path(new_id), std::filesystem::copy_options::recursive);
    return new_id;
}

void AutoRLSession::log_step(const Configuration& lambda, long budget, const Objectives& objectives,
                             const StateFeatures& features) {
    if (cfg_.checkpoint_dir.empty()) return;
    const auto path = cfg_.checkpoint_dir / "session_log.csv";
    const bool fresh = !std::filesystem::exists(path);
    std::ofstream out(path, std::ios::app);
    if (fresh)
        out << "step_index,lambda_hash,budget,mean_return,runtime_seconds,diverged,"
               "grad_norm_mean,grad_norm_var,loss_mean\n";
    auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
    char hash[20];
    std::snprintf(hash, sizeof(hash), "%016llx", static_cast<unsigned long long>(config_hash(lambda)));
    out << step_index_ << "," << hash << "," << budget << "," << format_double(objectives.mean_return) << ","
        << format_double(objectives.runtime_seconds) << "," << (objectives.diverged ? 1 : 0) << ","
        << opt(features.grad_norm_mean) << "," << opt(features.grad_norm_var) << "," << opt(features.loss_mean)
        << "\n";
}

}  // namespace arlb
