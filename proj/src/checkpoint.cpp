#include "arlb/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>

namespace arlb {

namespace {

using json = nlohmann::json;
using I64Mat = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

// Snapshot of every mutable array in a TrainingState under stable names.
// Matrices are flattened row-major into the blobs.
struct ArrayIndex {
    std::vector<std::pair<std::string, Mat*>> f64;
    std::vector<std::pair<std::string, I64Mat*>> i64;
    // Deferred vector views: copied through a staging matrix.
    std::vector<std::pair<std::string, Vec*>> f64_vec;
};

void index_net(ArrayIndex& idx, const std::string& prefix, MlpParams& net) {
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        idx.f64.emplace_back(prefix + ".layer" + std::to_string(i) + ".weight", &net.layers[i].weight);
        idx.f64_vec.emplace_back(prefix + ".layer" + std::to_string(i) + ".bias", &net.layers[i].bias);
    }
    if (net.log_std.size() > 0) idx.f64_vec.emplace_back(prefix + ".log_std", &net.log_std);
}

void index_adam(ArrayIndex& idx, const std::string& prefix, AdamState& opt) {
    for (std::size_t i = 0; i < opt.m.layers.size(); ++i) {
        const std::string layer = prefix + ".layer" + std::to_string(i);
        idx.f64.emplace_back(layer + ".m.weight", &opt.m.layers[i].weight);
        idx.f64_vec.emplace_back(layer + ".m.bias", &opt.m.layers[i].bias);
        idx.f64.emplace_back(layer + ".v.weight", &opt.v.layers[i].weight);
        idx.f64_vec.emplace_back(layer + ".v.bias", &opt.v.layers[i].bias);
    }
    if (opt.m.log_std.size() > 0) {
        idx.f64_vec.emplace_back(prefix + ".m.log_std", &opt.m.log_std);
        idx.f64_vec.emplace_back(prefix + ".v.log_std", &opt.v.log_std);
    }
}

ArrayIndex build_index(TrainingState& state) {
    ArrayIndex idx;
    switch (state.algo) {
        case Algo::Ppo:
            index_net(idx, "policy", state.policy);
            index_net(idx, "value", state.value);
            index_adam(idx, "policy_opt", state.policy_opt);
            index_adam(idx, "value_opt", state.value_opt);
            idx.f64.emplace_back("rollout.obs", &state.rollout.obs);
            idx.f64.emplace_back("rollout.actions", &state.rollout.actions);
            idx.f64_vec.emplace_back("rollout.logp", &state.rollout.logp);
            idx.f64_vec.emplace_back("rollout.value", &state.rollout.value);
            idx.f64_vec.emplace_back("rollout.reward", &state.rollout.reward);
            idx.f64_vec.emplace_back("rollout.done", &state.rollout.done);
            break;
        case Algo::Dqn:
            index_net(idx, "q", state.q);
            index_net(idx, "q_target", state.q_target);
            index_adam(idx, "q_opt", state.q_opt);
            break;
        case Algo::Sac:
            index_net(idx, "actor", state.actor);
            index_net(idx, "q1", state.q1);
            index_net(idx, "q2", state.q2);
            index_net(idx, "q1_target", state.q1_target);
            index_net(idx, "q2_target", state.q2_target);
            index_adam(idx, "actor_opt", state.actor_opt);
            index_adam(idx, "q1_opt", state.q1_opt);
            index_adam(idx, "q2_opt", state.q2_opt);
            break;
    }
    if (state.algo != Algo::Ppo) {
        ReplayBuffer& buf = state.buffer;
        idx.f64.emplace_back("buffer.obs", &buf.obs_storage());
        idx.f64.emplace_back("buffer.next_obs", &buf.next_obs_storage());
        idx.f64.emplace_back("buffer.actions", &buf.actions_storage());
        idx.f64_vec.emplace_back("buffer.rewards", &buf.rewards_storage());
        idx.f64_vec.emplace_back("buffer.terminated", &buf.terminated_storage());
    }
    return idx;
}

void write_blob(const std::filesystem::path& path, const char* data, std::size_t bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("checkpoint: cannot write '" + path.string() + "'");
    out.write(data, static_cast<std::streamsize>(bytes));
}

std::vector<char> read_blob(const std::filesystem::path& path, std::size_t expected_bytes, const std::string& name) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw IoError("checkpoint: missing array '" + name + "' (" + path.string() + ")");
    const auto size = static_cast<std::size_t>(in.tellg());
    if (size != expected_bytes)
        throw IoError("checkpoint: array '" + name + "' has " + std::to_string(size) + " bytes, expected " +
                      std::to_string(expected_bytes));
    std::vector<char> data(size);
    in.seekg(0);
    in.read(data.data(), static_cast<std::streamsize>(size));
    return data;
}

json value_to_json(const HpValue& value) {
    if (std::holds_alternative<bool>(value)) return std::get<bool>(value);
    if (std::holds_alternative<long>(value)) return std::get<long>(value);
    if (std::holds_alternative<double>(value)) return std::get<double>(value);
    return std::get<std::string>(value);
}

HpValue value_from_json(const json& j) {
    if (j.is_boolean()) return j.get<bool>();
    if (j.is_number_integer()) return j.get<long>();
    if (j.is_number_float()) return j.get<double>();
    return j.get<std::string>();
}

json rng_to_json(const Rng& rng) {
    json out = json::array();
    for (auto word : rng.state()) out.push_back(word);
    return out;
}

void rng_from_json(const json& j, Rng& rng) {
    for (int k = 0; k < 4; ++k) rng.state()[static_cast<std::size_t>(k)] = j.at(static_cast<std::size_t>(k)).get<std::uint64_t>();
}

json adam_meta(const AdamState& opt) {
    return json{{"lr", opt.lr}, {"beta1", opt.beta1}, {"beta2", opt.beta2}, {"eps", opt.eps}, {"t", opt.t}};
}

void adam_meta_load(const json& j, AdamState& opt) {
    opt.lr = j.at("lr").get<double>();
    opt.beta1 = j.at("beta1").get<double>();
    opt.beta2 = j.at("beta2").get<double>();
    opt.eps = j.at("eps").get<double>();
    opt.t = j.at("t").get<long>();
}

}  // namespace

void save_checkpoint(const TrainingState& state, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    // The index needs mutable pointers; saving never actually mutates.
    auto& mutable_state = const_cast<TrainingState&>(state);
    ArrayIndex idx = build_index(mutable_state);

    json manifest;
    manifest["format"] = "arlb-checkpoint";
    manifest["version"] = 1;
    manifest["algorithm"] = algo_name(state.algo);
    manifest["env_name"] = state.env_name;
    manifest["seed"] = state.seed;
    manifest["total_timesteps"] = state.total_timesteps;
    manifest["step_count"] = state.step_count;
    manifest["grad_steps"] = state.grad_steps;
    manifest["rollout_filled"] = state.rollout.filled;
    manifest["log_alpha"] = state.log_alpha;
    manifest["alpha_m"] = state.alpha_m;
    manifest["alpha_v"] = state.alpha_v;
    manifest["alpha_t"] = state.alpha_t;
    manifest["space_id"] = state.config.space_id;
    json config = json::object();
    for (const auto& [name, value] : state.config.values) config[name] = value_to_json(value);
    manifest["config"] = config;
    manifest["rng"] = {{"act", rng_to_json(state.act_rng)},
                       {"buf", rng_to_json(state.buf_rng)},
                       {"update", rng_to_json(state.update_rng)}};
    manifest["adam"] = json::object();
    for (const auto& [name, opt] :
         std::initializer_list<std::pair<const char*, const AdamState*>>{{"policy_opt", &state.policy_opt},
                                                                         {"value_opt", &state.value_opt},
                                                                         {"q_opt", &state.q_opt},
                                                                         {"actor_opt", &state.actor_opt},
                                                                         {"q1_opt", &state.q1_opt},
                                                                         {"q2_opt", &state.q2_opt}})
        manifest["adam"][name] = adam_meta(*opt);
    manifest["buffer"] = {{"cursor", state.buffer.cursor()},
                          {"size", state.buffer.size()},
                          {"capacity", state.buffer.capacity()},
                          {"stored_rows", mutable_state.buffer.obs_storage().rows()},
                          {"max_priority", state.buffer.max_priority()}};

    json arrays = json::array();
    auto add_entry = [&arrays](const std::string& name, const char* dtype, long rows, long cols) {
        arrays.push_back(json{{"name", name}, {"dtype", dtype}, {"rows", rows}, {"cols", cols},
                              {"file", name + ".bin"}});
    };

    for (auto& [name, mat] : idx.f64) {
        add_entry(name, "f64", mat->rows(), mat->cols());
        // Row-major flatten.
        Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = *mat;
        write_blob(dir / (name + ".bin"), reinterpret_cast<const char*>(rm.data()),
                   static_cast<std::size_t>(rm.size()) * sizeof(double));
    }
    for (auto& [name, vec] : idx.f64_vec) {
        add_entry(name, "f64", vec->size(), 1);
        write_blob(dir / (name + ".bin"), reinterpret_cast<const char*>(vec->data()),
                   static_cast<std::size_t>(vec->size()) * sizeof(double));
    }
    {
        // Environment state and RNG streams.
        const Mat env_state = state.env.pack_state();
        add_entry("env.state", "f64", env_state.rows(), env_state.cols());
        Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = env_state;
        write_blob(dir / "env.state.bin", reinterpret_cast<const char*>(rm.data()),
                   static_cast<std::size_t>(rm.size()) * sizeof(double));

        const I64Mat env_rng = state.env.pack_rng();
        add_entry("env.rng", "i64", env_rng.rows(), env_rng.cols());
        Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rmi = env_rng;
        write_blob(dir / "env.rng.bin", reinterpret_cast<const char*>(rmi.data()),
                   static_cast<std::size_t>(rmi.size()) * sizeof(std::int64_t));
    }
    if (state.algo != Algo::Ppo && state.buffer.prioritized()) {
        const auto& nodes = mutable_state.buffer.tree().nodes();
        add_entry("buffer.tree", "f64", static_cast<long>(nodes.size()), 1);
        write_blob(dir / "buffer.tree.bin", reinterpret_cast<const char*>(nodes.data()),
                   nodes.size() * sizeof(double));
    }
    manifest["arrays"] = arrays;

    std::ofstream out(dir / "manifest.json", std::ios::trunc);
    if (!out) throw IoError("checkpoint: cannot write manifest in '" + dir.string() + "'");
    out << manifest.dump(2) << "\n";
}

TrainingState load_checkpoint(const std::filesystem::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw IoError("checkpoint: missing manifest.json in '" + dir.string() + "'");
    json manifest;
    try {
        in >> manifest;
    } catch (const json::exception& e) {
        throw IoError(std::string("checkpoint: corrupt manifest: ") + e.what());
    }
    if (manifest.value("format", "") != "arlb-checkpoint") throw IoError("checkpoint: not an arlb checkpoint");

    Configuration config;
    config.space_id = manifest.at("space_id").get<std::string>();
    for (const auto& [name, value] : manifest.at("config").items()) config.values[name] = value_from_json(value);

    const Algo algo = algo_from_name(manifest.at("algorithm").get<std::string>());
    TrainingState state = init(algo, config, manifest.at("env_name").get<std::string>(),
                               manifest.at("seed").get<std::uint64_t>(), manifest.at("total_timesteps").get<long>());

    state.step_count = manifest.at("step_count").get<long>();
    state.grad_steps = manifest.at("grad_steps").get<long>();
    state.rollout.filled = manifest.at("rollout_filled").get<long>();
    state.log_alpha = manifest.at("log_alpha").get<double>();
    state.alpha_m = manifest.at("alpha_m").get<double>();
    state.alpha_v = manifest.at("alpha_v").get<double>();
    state.alpha_t = manifest.at("alpha_t").get<long>();
    rng_from_json(manifest.at("rng").at("act"), state.act_rng);
    rng_from_json(manifest.at("rng").at("buf"), state.buf_rng);
    rng_from_json(manifest.at("rng").at("update"), state.update_rng);
    adam_meta_load(manifest.at("adam").at("policy_opt"), state.policy_opt);
    adam_meta_load(manifest.at("adam").at("value_opt"), state.value_opt);
    adam_meta_load(manifest.at("adam").at("q_opt"), state.q_opt);
    adam_meta_load(manifest.at("adam").at("actor_opt"), state.actor_opt);
    adam_meta_load(manifest.at("adam").at("q1_opt"), state.q1_opt);
    adam_meta_load(manifest.at("adam").at("q2_opt"), state.q2_opt);

    if (algo != Algo::Ppo) {
        const auto& buf = manifest.at("buffer");
        state.buffer.ensure_rows(buf.at("stored_rows").get<long>());
        state.buffer.restore_counters(buf.at("cursor").get<long>(), buf.at("size").get<long>(),
                                      buf.at("max_priority").get<double>());
    }

    ArrayIndex idx = build_index(state);
    std::map<std::string, json> listed;
    for (const auto& entry : manifest.at("arrays")) listed[entry.at("name").get<std::string>()] = entry;

    auto expect = [&](const std::string& name, long rows, long cols) -> std::filesystem::path {
        auto it = listed.find(name);
        if (it == listed.end()) throw IoError("checkpoint: manifest is missing array '" + name + "'");
        if (it->second.at("rows").get<long>() != rows || it->second.at("cols").get<long>() != cols)
            throw IoError("checkpoint: array '" + name + "' has unexpected shape");
        return dir / it->second.at("file").get<std::string>();
    };

    for (auto& [name, mat] : idx.f64) {
        const auto path = expect(name, mat->rows(), mat->cols());
        const auto data =
            read_blob(path, static_cast<std::size_t>(mat->size()) * sizeof(double), name);
        Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(mat->rows(), mat->cols());
        std::memcpy(rm.data(), data.data(), data.size());
        *mat = rm;
    }
    for (auto& [name, vec] : idx.f64_vec) {
        const auto path = expect(name, vec->size(), 1);
        const auto data = read_blob(path, static_cast<std::size_t>(vec->size()) * sizeof(double), name);
        std::memcpy(vec->data(), data.data(), data.size());
    }
    {
        Mat env_state(state.env.n_envs(), state.env.pack_state().cols());
        const auto path = expect("env.state", env_state.rows(), env_state.cols());
        const auto data =
            read_blob(path, static_cast<std::size_t>(env_state.size()) * sizeof(double), "env.state");
        Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(env_state.rows(),
                                                                                  env_state.cols());
        std::memcpy(rm.data(), data.data(), data.size());
        state.env.unpack_state(rm);

        I64Mat env_rng(state.env.n_envs(), 4);
        const auto rng_path = expect("env.rng", env_rng.rows(), env_rng.cols());
        const auto rng_data =
            read_blob(rng_path, static_cast<std::size_t>(env_rng.size()) * sizeof(std::int64_t), "env.rng");
        Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rmi(env_rng.rows(),
                                                                                         env_rng.cols());
        std::memcpy(rmi.data(), rng_data.data(), rng_data.size());
        state.env.unpack_rng(rmi);
    }
    if (algo != Algo::Ppo && state.buffer.prioritized()) {
        auto& nodes = state.buffer.tree().nodes();
        const auto path = expect("buffer.tree", static_cast<long>(nodes.size()), 1);
        const auto data = read_blob(path, nodes.size() * sizeof(double), "buffer.tree");
        std::memcpy(nodes.data(), data.data(), data.size());
    }
    return state;
}

}  // namespace arlb
