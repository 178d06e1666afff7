// Command-line front end: every capability of the library behind one
// binary. Exit codes: 0 success, 1 domain error, 2 I/O error.

#include <CLI11.hpp>

#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "rootoram/metrics.hpp"
#include "rootoram/netserve.hpp"
#include "rootoram/oracle.hpp"
#include "rootoram/privacy.hpp"
#include "rootoram/protocol.hpp"
#include "rootoram/simharness.hpp"

using namespace rootoram;

namespace {

struct GlobalOpts {
  std::uint64_t seed = 0;
  std::string out;  // empty = stdout
  std::string format = "csv";
};

std::ostream& open_output(const GlobalOpts& opts, std::ofstream& file) {
  if (opts.out.empty()) return std::cout;
  file.open(opts.out);
  if (!file) throw IoError("cannot open output file: " + opts.out);
  return file;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Lambda parse_lambda(const std::string& text) {
  if (text == "inf" || text == "infinite") return Lambda::infinite();
  try {
    return Lambda::rate(std::stod(text));
  } catch (const std::invalid_argument&) {
    throw DomainError("bad lambda: " + text);
  }
}

void emit_pairs(std::ostream& out, const std::string& format,
                const std::vector<std::pair<std::string, std::string>>& rows) {
  if (format == "json") {
    nlohmann::json doc;
    for (const auto& [key, value] : rows) {
      try {
        std::size_t used = 0;
        const double d = std::stod(value, &used);
        if (used == value.size()) {
          doc[key] = d;
          continue;
        }
      } catch (...) {
      }
      doc[key] = value;
    }
    out << doc.dump(2) << '\n';
    return;
  }
  for (const auto& [key, value] : rows) out << key << ',' << value << '\n';
}

void add_accountant(CLI::App& app, GlobalOpts& opts) {
  auto* cmd = app.add_subcommand(
      "accountant", "Closed-form epsilon/delta/bandwidth accounting");
  auto n_blocks = std::make_shared<std::uint64_t>(0);
  auto p = std::make_shared<double>(0.0);
  auto z = std::make_shared<unsigned>(0);
  auto k = std::make_shared<unsigned>(0);
  auto lambda_text = std::make_shared<std::string>("inf");
  auto stash_bound = std::make_shared<std::uint64_t>(0);
  auto m = std::make_shared<std::uint64_t>(1);
  auto t = std::make_shared<std::uint64_t>(1);
  auto ratio = std::make_shared<double>(0.0);
  cmd->add_option("--N", *n_blocks, "Block count (for epsilon)");
  cmd->add_option("--p", *p, "Remap parameter");
  cmd->add_option("--Z", *z, "Blocks per bucket");
  cmd->add_option("--k", *k, "Tree depth parameter");
  cmd->add_option("--lambda", *lambda_text, "Fake-access rate or 'inf'");
  cmd->add_option("--C", *stash_bound, "Stash bound for delta");
  cmd->add_option("--m", *m, "Composition factor");
  cmd->add_option("--t", *t, "Recursion rounds");
  cmd->add_option("--R", *ratio, "Outsourcing ratio for recursion");

  cmd->callback([=, &opts] {
    std::vector<std::pair<std::string, std::string>> rows;
    std::optional<PrivacySpec> spec;
    if (*n_blocks && *p > 0.0) {
      spec = PrivacySpec{epsilon_of(*n_blocks, *p), 0.0};
      rows.emplace_back("epsilon", fmt_double(spec->epsilon));
    }
    if (*p > 0.0 && *z && *k) {
      const double delta = delta_of(*p, *stash_bound, *z, *k);
      if (spec) spec->delta = delta;
      rows.emplace_back("delta", fmt_double(delta));
    }
    if (*z && *k) {
      rows.emplace_back(
          "bandwidth",
          fmt_double(bandwidth_of(*z, *k, parse_lambda(*lambda_text))));
    }
    if (spec && *m > 1) {
      const PrivacySpec composed = compose(*m, *spec);
      rows.emplace_back("epsilon_composed", fmt_double(composed.epsilon));
      rows.emplace_back("delta_composed", fmt_double(composed.delta));
    }
    if (spec && *t > 1) {
      if (!(*ratio > 0.0)) throw DomainError("recursion needs --R");
      const double bw = *z && *k
                            ? bandwidth_of(*z, *k, parse_lambda(*lambda_text))
                            : 0.0;
      const RecursionPlan plan = recursion_plan(*t, *spec, bw, *ratio);
      rows.emplace_back("epsilon_recursed", fmt_double(plan.spec.epsilon));
      rows.emplace_back("delta_recursed", fmt_double(plan.spec.delta));
      rows.emplace_back("bandwidth_recursed", fmt_double(plan.bandwidth));
      rows.emplace_back("R_recursed", fmt_double(plan.outsourcing_ratio));
    }
    if (rows.empty())
      throw DomainError(
          "nothing to compute; give --N/--p for epsilon, --Z/--k for "
          "bandwidth, add --C for delta");
    std::ofstream file;
    emit_pairs(open_output(opts, file), opts.format, rows);
  });
}

void add_solve(CLI::App& app, GlobalOpts& opts) {
  auto* cmd = app.add_subcommand(
      "solve",
      "Invert the accountant: p from epsilon, k from a bandwidth budget");
  auto n_blocks = std::make_shared<std::uint64_t>(0);
  auto epsilon = std::make_shared<double>(-1.0);
  auto bandwidth = std::make_shared<double>(0.0);
  auto z = std::make_shared<unsigned>(2);
  auto lambda_text = std::make_shared<std::string>("inf");
  cmd->add_option("--N", *n_blocks, "Block count");
  cmd->add_option("--epsilon", *epsilon, "Target epsilon");
  cmd->add_option("--bandwidth", *bandwidth, "Bandwidth budget in blocks");
  cmd->add_option("--Z", *z, "Blocks per bucket");
  cmd->add_option("--lambda", *lambda_text, "Fake-access rate or 'inf'");

  cmd->callback([=, &opts] {
    std::vector<std::pair<std::string, std::string>> rows;
    if (*epsilon >= 0.0) {
      if (!*n_blocks) throw DomainError("--epsilon needs --N");
      const double p = solve_p_for_epsilon(*n_blocks, *epsilon);
      rows.emplace_back("p", fmt_double(p));
      rows.emplace_back("epsilon_check", fmt_double(epsilon_of(*n_blocks, p)));
    }
    if (*bandwidth > 0.0) {
      rows.emplace_back(
          "k",
          std::to_string(
              solve_k_for_bandwidth(*bandwidth, *z, parse_lambda(*lambda_text))));
    }
    if (rows.empty()) throw DomainError("give --epsilon and/or --bandwidth");
    std::ofstream file;
    emit_pairs(open_output(opts, file), opts.format, rows);
  });
}

void add_verify(CLI::App& app, GlobalOpts& opts) {
  auto* cmd = app.add_subcommand(
      "verify", "Brute-force check of the worst-case probability ratio");
  auto n_leaves = std::make_shared<std::uint32_t>(4);
  auto p_text = std::make_shared<std::string>("1/2");
  auto seq_len = std::make_shared<unsigned>(3);
  auto capacity = std::make_shared<std::uint64_t>(2);
  auto elements = std::make_shared<unsigned>(4);
  cmd->add_option("--N", *n_leaves, "Leaves");
  cmd->add_option("--p", *p_text, "Remap parameter, exact 'a/b' accepted");
  cmd->add_option("--M", *seq_len, "Sequence length");
  cmd->add_option("--capacity", *capacity, "Blocks one leaf can hold");
  cmd->add_option("--elements", *elements, "Element universe size");

  cmd->callback([=, &opts] {
    const auto model =
        ModelParams::create(*n_leaves, parse_rational(*p_text), *capacity);
    const auto result = max_ratio_bruteforce(model, *seq_len, *elements);
    const auto delta = delta_witness(model);

    nlohmann::json doc;
    doc["N"] = *n_leaves;
    doc["p"] = *p_text;
    doc["M"] = *seq_len;
    doc["capacity"] = *capacity;
    doc["elements"] = *elements;
    doc["max_ratio"] = result.max_ratio.str();
    doc["bound"] = model.bound().str();
    doc["within_bound"] = result.max_ratio <= model.bound();
    doc["bound_attained"] = result.max_ratio == model.bound();
    doc["pattern_witness"] = result.pattern_witness;
    doc["witness"] = {{"real1", result.witness.real1},
                      {"real2", result.witness.real2},
                      {"observed", result.witness.observed},
                      {"diff_pos", result.witness.diff_pos},
                      {"prob1", result.witness.prob1.str()},
                      {"prob2", result.witness.prob2.str()}};
    doc["delta_witness"] = {{"real1", delta.real1},
                            {"real2", delta.real2},
                            {"observed", delta.observed},
                            {"prob1", delta.prob1.str()},
                            {"prob2", delta.prob2.str()}};
    std::ofstream file;
    std::ostream& out = open_output(opts, file);
    out << doc.dump(2) << '\n';
    out << "max ratio " << result.max_ratio.str() << " vs bound "
        << model.bound().str() << ": "
        << (result.max_ratio <= model.bound() ? "PASS" : "FAIL") << '\n';
  });
}

void add_metrics(CLI::App& app, GlobalOpts& opts) {
  auto* cmd = app.add_subcommand(
      "metrics",
      "Entropy/KL metrics of a distribution CSV (outcome,mass) or "
      "k-anonymity of a channel CSV (input,output,mass)");
  auto input = std::make_shared<std::string>();
  auto bits = std::make_shared<bool>(false);
  cmd->add_option("--in", *input, "CSV file; '-' for stdin")->required();
  cmd->add_flag("--bits", *bits, "Report in bits instead of nats");

  cmd->callback([=, &opts] {
    std::ifstream file_in;
    std::istream* in = &std::cin;
    if (*input != "-") {
      file_in.open(*input);
      if (!file_in) throw IoError("cannot open " + *input);
      in = &file_in;
    }
    std::vector<std::array<std::string, 3>> triples;
    bool has_three = false;
    std::string line;
    while (std::getline(*in, line)) {
      if (line.empty()) continue;
      std::stringstream row(line);
      std::array<std::string, 3> fields{};
      unsigned count = 0;
      std::string field;
      while (std::getline(row, field, ',') && count < 3)
        fields[count++] = field;
      if (count < 2) throw DomainError("bad CSV row: " + line);
      has_three |= (count == 3);
      triples.push_back(fields);
    }
    if (triples.empty()) throw DomainError("empty input");

    const double unit = *bits ? std::log(2.0) : 1.0;
    std::vector<std::pair<std::string, std::string>> rows;
    if (!has_three) {
      std::vector<double> mass;
      for (const auto& t : triples) mass.push_back(std::stod(t[1]));
      const Distribution dist = Distribution::create(mass);
      const std::vector<double> uniform(
          dist.mass.size(), 1.0 / static_cast<double>(dist.mass.size()));
      rows.emplace_back("shannon_entropy",
                        fmt_double(shannon_entropy(dist.mass) / unit));
      rows.emplace_back("min_entropy",
                        fmt_double(min_entropy(dist.mass) / unit));
      rows.emplace_back("kl_from_uniform",
                        fmt_double(kl_divergence(dist.mass, uniform) / unit));
    } else {
      std::map<std::string, std::size_t> input_ids, output_ids;
      for (const auto& t : triples) {
        input_ids.emplace(t[0], input_ids.size());
        output_ids.emplace(t[1], output_ids.size());
      }
      std::vector<std::vector<double>> channel(
          input_ids.size(), std::vector<double>(output_ids.size(), 0.0));
      for (const auto& t : triples)
        channel[input_ids[t[0]]][output_ids[t[1]]] = std::stod(t[2]);
      rows.emplace_back("k_anonymity", std::to_string(k_anonymity(channel)));
    }
    std::ofstream file;
    emit_pairs(open_output(opts, file), opts.format, rows);
  });
}

struct ProtocolFlags {
  unsigned L = 10;
  unsigned k = 1;
  std::string p_text = "";
  unsigned Z = 4;
  unsigned B = 64;
  std::string lambda_text = "inf";

  Params to_params() const {
    const std::uint32_t n = std::uint32_t{1} << L;
    const double p = p_text.empty() ? Params::uniform_p(n) : std::stod(p_text);
    return Params::create(L, k, p, Z, B, parse_lambda(lambda_text));
  }
};

void add_protocol_flags(CLI::App* cmd, ProtocolFlags& flags) {
  cmd->add_option("--L", flags.L, "Tree exponent, N = 2^L");
  cmd->add_option("--k", flags.k, "Tree depth parameter");
  cmd->add_option("--p", flags.p_text, "Remap parameter; default 1 - 1/N");
  cmd->add_option("--Z", flags.Z, "Blocks per bucket");
  cmd->add_option("--B", flags.B, "Block payload bytes");
  cmd->add_option("--lambda", flags.lambda_text, "Fake-access rate or 'inf'");
}

void add_simulate(CLI::App& app, GlobalOpts& opts) {
  auto* cmd =
      app.add_subcommand("simulate", "Drive the protocol with random accesses");
  auto flags = std::make_shared<ProtocolFlags>();
  add_protocol_flags(cmd, *flags);
  auto accesses = std::make_shared<std::uint64_t>(10000);
  auto audit = std::make_shared<unsigned>(0);
  auto connect = std::make_shared<std::string>();
  auto rate = std::make_shared<std::uint64_t>(0);
  auto burst = std::make_shared<std::size_t>(8192);
  cmd->add_option("--accesses", *accesses, "Real accesses to issue");
  cmd->add_option("--audit-interval", *audit,
                  "Full-state audit every this many accesses (0 = off)");
  cmd->add_option("--connect", *connect,
                  "host:port of a remote store (default: in-memory)");
  cmd->add_option("--rate-bps", *rate, "Client-side throttle, bits/s");
  cmd->add_option("--burst-bytes", *burst, "Throttle burst size");

  cmd->callback([=, &opts] {
    const Params params = flags->to_params();
    std::vector<std::pair<std::string, std::string>> rows;
    if (connect->empty()) {
      SimConfig config;
      config.params = params;
      config.accesses = *accesses;
      config.seed = opts.seed;
      config.audit_interval = *audit;
      const StashStats stats = run_sim(config);
      rows.emplace_back("max_stash", std::to_string(stats.max_stash));
      rows.emplace_back("R", fmt_double(outsourcing_ratio(params, stats)));
      rows.emplace_back("blocks_transferred",
                        std::to_string(stats.blocks_transferred));
      rows.emplace_back("real_accesses", std::to_string(stats.real_accesses));
      rows.emplace_back("fake_accesses", std::to_string(stats.fake_accesses));
      rows.emplace_back("warmup_max_stash",
                        std::to_string(stats.warmup_max_stash));
      rows.emplace_back("posmap_bytes",
                        std::to_string(position_map_bytes(params)));
      rows.emplace_back("wall_seconds", fmt_double(stats.wall_seconds));
    } else {
      const auto colon = connect->rfind(':');
      if (colon == std::string::npos)
        throw DomainError("--connect wants host:port");
      const std::string host = connect->substr(0, colon);
      const auto port =
          static_cast<std::uint16_t>(std::stoul(connect->substr(colon + 1)));
      const TreeShape shape = derive_tree_shape(params);
      const std::size_t env_size = kRecordHeader + params.B;
      std::optional<ThrottleConfig> throttle;
      if (*rate) throttle = ThrottleConfig{*rate, *burst};
      RemoteBackend store(host, port, shape, params.Z, env_size, throttle);
      SimConfig config;
      config.params = params;
      config.accesses = *accesses;
      config.seed = opts.seed;
      config.audit_interval = *audit;
      const StashStats stats = run_protocol(config, store);
      rows.emplace_back("max_stash", std::to_string(stats.max_stash));
      rows.emplace_back("R", fmt_double(outsourcing_ratio(params, stats)));
      rows.emplace_back("blocks_transferred",
                        std::to_string(stats.blocks_transferred));
      rows.emplace_back("real_accesses", std::to_string(stats.real_accesses));
      rows.emplace_back("fake_accesses", std::to_string(stats.fake_accesses));
      rows.emplace_back("warmup_max_stash",
                        std::to_string(stats.warmup_max_stash));
      rows.emplace_back("posmap_bytes",
                        std::to_string(position_map_bytes(params)));
      rows.emplace_back(
          "payload_bytes",
          std::to_string(store.counters().payload_bytes_received +
                         store.counters().payload_bytes_sent));
      rows.emplace_back("wall_seconds", fmt_double(stats.wall_seconds));
    }
    std::ofstream file;
    emit_pairs(open_output(opts, file), opts.format, rows);
  });
}

void add_sweep(CLI::App& app, GlobalOpts& opts) {
  auto* cmd = app.add_subcommand("sweep", "Parameter sweep from a JSON grid");
  auto grid_path = std::make_shared<std::string>();
  auto jobs = std::make_shared<unsigned>(1);
  auto audit = std::make_shared<unsigned>(1000);
  cmd->add_option("--grid", *grid_path, "JSON grid file; '-' for stdin")
      ->required();
  cmd->add_option("--jobs", *jobs, "Worker threads");
  cmd->add_option("--audit-interval", *audit,
                  "Audit cadence inside each cell (0 = off)");

  cmd->callback([=, &opts] {
    std::string text;
    if (*grid_path == "-") {
      std::stringstream buffer;
      buffer << std::cin.rdbuf();
      text = buffer.str();
    } else {
      std::ifstream in(*grid_path);
      if (!in) throw IoError("cannot open " + *grid_path);
      std::stringstream buffer;
      buffer << in.rdbuf();
      text = buffer.str();
    }
    const SweepGrid grid = SweepGrid::from_json(text);
    std::ofstream file;
    sweep(grid, open_output(opts, file), *jobs, *audit);
  });
}

void add_mgrowth(CLI::App& app, GlobalOpts& opts) {
  auto* cmd = app.add_subcommand(
      "mgrowth", "Max stash as the access count grows, one run per seed");
  auto flags = std::make_shared<ProtocolFlags>();
  flags->lambda_text = "1";
  add_protocol_flags(cmd, *flags);
  auto m_list = std::make_shared<std::vector<std::uint64_t>>();
  cmd->add_option("--M", *m_list, "Milestones, strictly increasing")
      ->required()
      ->expected(-1);

  cmd->callback([=, &opts] {
    // default to the stash-growth study configuration: p tied to k
    if (flags->p_text.empty())
      flags->p_text =
          fmt_double(1.0 - std::ldexp(1.0, -static_cast<int>(flags->k)));
    const Params params = flags->to_params();
    std::ofstream file;
    m_growth(params, *m_list, opts.seed, open_output(opts, file));
  });
}

void add_serve(CLI::App& app, GlobalOpts&) {
  auto* cmd = app.add_subcommand("serve", "Run the bucket store server");
  auto flags = std::make_shared<ProtocolFlags>();
  add_protocol_flags(cmd, *flags);
  auto listen = std::make_shared<std::string>("127.0.0.1:0");
  auto snapshot_path = std::make_shared<std::string>();
  cmd->add_option("--listen", *listen, "host:port to bind");
  cmd->add_option("--snapshot", *snapshot_path,
                  "Load the store from a snapshot file");

  cmd->callback([=] {
    const auto colon = listen->rfind(':');
    if (colon == std::string::npos)
      throw DomainError("--listen wants host:port");
    const std::string host = listen->substr(0, colon);
    const auto port =
        static_cast<std::uint16_t>(std::stoul(listen->substr(colon + 1)));

    std::optional<MemoryBackend> store;
    TreeShape shape = TreeShape::create(flags->L, flags->k);
    unsigned Z = flags->Z;
    std::size_t env_size = kRecordHeader + flags->B;
    if (!snapshot_path->empty()) {
      std::ifstream in(*snapshot_path, std::ios::binary);
      if (!in) throw IoError("cannot open " + *snapshot_path);
      auto [info, loaded] = load_snapshot(in);
      shape = TreeShape::create(info.L, info.k);
      Z = info.Z;
      env_size = info.envelope_size;
      store.emplace(std::move(loaded));
    } else {
      store.emplace(shape, Z, env_size);
    }

    NetServer server(*store, shape, Z, env_size);
    const std::uint16_t bound = server.start(host, port);
    std::cout << "listening on " << host << ':' << bound << std::endl;
    for (;;) std::this_thread::sleep_for(std::chrono::seconds(3600));
  });
}

void add_bench(CLI::App& app, GlobalOpts& opts) {
  auto* cmd =
      app.add_subcommand("bench", "Access latency across k and throttle settings");
  auto L = std::make_shared<unsigned>(10);
  auto k_list = std::make_shared<std::vector<unsigned>>();
  auto z = std::make_shared<unsigned>(2);
  auto b = std::make_shared<unsigned>(1024);
  auto rates = std::make_shared<std::vector<std::uint64_t>>();
  auto accesses = std::make_shared<std::uint32_t>(20);
  auto burst = std::make_shared<std::size_t>(8192);
  cmd->add_option("--L", *L, "Tree exponent");
  cmd->add_option("--k", *k_list, "k values")->required()->expected(-1);
  cmd->add_option("--Z", *z, "Blocks per bucket");
  cmd->add_option("--B", *b, "Block payload bytes");
  cmd->add_option("--rate-bps", *rates, "Throttle rates; 0 = unthrottled")
      ->required()
      ->expected(-1);
  cmd->add_option("--accesses", *accesses, "Timed accesses per cell");
  cmd->add_option("--burst-bytes", *burst, "Throttle burst size");

  cmd->callback([=, &opts] {
    std::vector<BenchCell> cells;
    for (std::uint64_t rate : *rates)
      for (unsigned k : *k_list) cells.push_back({k, *z, *b, rate});
    const auto rows = bench_latency(*L, cells, *accesses, opts.seed, *burst);
    std::ofstream file;
    std::ostream& out = open_output(opts, file);
    out << "k,Z,B,rate_bps,mean_ms,p50_ms,p95_ms,blocks_per_access\n";
    for (const auto& row : rows) {
      out << row.cell.k << ',' << row.cell.Z << ',' << row.cell.B << ','
          << row.cell.rate_bps << ',' << fmt_double(row.mean_ms) << ','
          << fmt_double(row.p50_ms) << ',' << fmt_double(row.p95_ms) << ','
          << fmt_double(row.blocks_per_access) << '\n';
    }
  });
}

void add_snapshot(CLI::App& app, GlobalOpts& opts) {
  auto* cmd = app.add_subcommand("snapshot", "Persist or inspect a store");
  auto* save = cmd->add_subcommand("save", "Write a warmed store to a file");
  auto flags = std::make_shared<ProtocolFlags>();
  add_protocol_flags(save, *flags);
  auto save_path = std::make_shared<std::string>();
  save->add_option("--file", *save_path, "Destination")->required();
  save->callback([=, &opts] {
    const Params params = flags->to_params();
    auto cipher = make_null_cipher();
    MemoryBackend store(derive_tree_shape(params), params.Z,
                        cipher->envelope_size(params.B));
    Client client(params, std::move(cipher), opts.seed);
    client.initialize(store);
    std::ofstream out(*save_path, std::ios::binary);
    if (!out) throw IoError("cannot open " + *save_path);
    save_snapshot(out, params.L, params.k, params.Z, params.B, store);
  });

  auto* load = cmd->add_subcommand("load", "Validate and describe a snapshot");
  auto load_path = std::make_shared<std::string>();
  load->add_option("--file", *load_path, "Snapshot file")->required();
  load->callback([=, &opts] {
    std::ifstream in(*load_path, std::ios::binary);
    if (!in) throw IoError("cannot open " + *load_path);
    const auto [info, store] = load_snapshot(in);
    std::vector<std::pair<std::string, std::string>> rows;
    rows.emplace_back("L", std::to_string(info.L));
    rows.emplace_back("k", std::to_string(info.k));
    rows.emplace_back("Z", std::to_string(info.Z));
    rows.emplace_back("B", std::to_string(info.B));
    rows.emplace_back("envelope_size", std::to_string(info.envelope_size));
    rows.emplace_back("buckets", std::to_string(store.bucket_count()));
    std::ofstream file;
    emit_pairs(open_output(opts, file), opts.format, rows);
  });
  cmd->require_subcommand(1);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tunable tree-based oblivious RAM with statistical privacy"};
  app.require_subcommand(1);

  GlobalOpts opts;
  app.add_option("--seed", opts.seed, "PRNG seed")->envname("ROOTORAM_SEED");
  app.add_option("--out", opts.out, "Output file (default stdout)");
  app.add_option("--format", opts.format, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}));

  add_accountant(app, opts);
  add_solve(app, opts);
  add_verify(app, opts);
  add_metrics(app, opts);
  add_simulate(app, opts);
  add_sweep(app, opts);
  add_mgrowth(app, opts);
  add_serve(app, opts);
  add_bench(app, opts);
  add_snapshot(app, opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const InvariantViolation& e) {
    std::cerr << "invariant violation: " << e.what() << '\n';
    return 1;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return 2;
  } catch (const ProtocolError& e) {
    std::cerr << "protocol error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
