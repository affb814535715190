// cosparse: experiment runner for co-sparse spike reconstruction.
//
//   cosparse synth        --output DIR [--format csv|binary]
//   cosparse train        --config FILE
//   cosparse sweep        --config FILE --measurements 16:80:8 --trials 20
//   cosparse classify     --config FILE
//   cosparse co-sparsity  --config FILE
//   cosparse convert-check PATH
//
// Every config key is also a flag of the same name. Exit codes: 0 success,
// 1 configuration error, 2 runtime error.

#include <exception>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "cosparse/errors.hpp"
#include "cosparse/experiment.hpp"

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

struct KeyFlags {
  std::string config_path;
  std::map<std::string, std::string> values;
};

void add_key_flags(CLI::App* cmd, KeyFlags& flags) {
  cmd->add_option("--config", flags.config_path, "flat key = value config file");
  for (const auto& key : cosparse::config_keys())
    cmd->add_option("--" + key, flags.values[key], "config key " + key);
}

cosparse::ExperimentConfig resolve(const CLI::App* cmd, const KeyFlags& flags) {
  cosparse::ExperimentConfig config;
  if (!flags.config_path.empty()) config = cosparse::load_config(flags.config_path);
  for (const auto& key : cosparse::config_keys())
    if (cmd->count("--" + key) > 0) config.set(key, flags.values.at(key));
  config.validate();
  return config;
}

void print_files(const std::vector<std::filesystem::path>& files) {
  for (const auto& f : files) std::cout << "wrote " << f.string() << '\n';
}

int convert_check(const std::string& path) {
  const auto data = cosparse::load_dataset(path);
  data.validate();
  nlohmann::ordered_json j;
  j["path"] = path;
  j["name"] = data.name;
  j["frames"] = data.frames.size();
  j["frame_length"] = data.frame_length();
  j["labeled"] = data.labeled();
  if (data.labeled()) {
    std::map<int, std::size_t> hist;
    for (int label : data.labels()) ++hist[label];
    nlohmann::ordered_json h = nlohmann::ordered_json::object();
    for (const auto& [label, count] : hist) h[std::to_string(label)] = count;
    j["labels"] = h;
  }
  std::cout << j.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Co-sparse analysis reconstruction of neural spike frames"};
  app.require_subcommand(1);

  KeyFlags synth_flags, train_flags, sweep_flags, classify_flags, cosparsity_flags;
  std::string synth_format = "csv";
  std::string check_path;

  auto* synth = app.add_subcommand("synth", "write a synthetic spike dataset");
  add_key_flags(synth, synth_flags);
  synth->add_option("--format", synth_format, "csv or binary")->check(CLI::IsMember({"csv", "binary"}));

  auto* train = app.add_subcommand("train", "fit the order-variance model and write model.txt");
  add_key_flags(train, train_flags);

  auto* sweep = app.add_subcommand("sweep", "PRD sweep over measurement counts for every method");
  add_key_flags(sweep, sweep_flags);

  auto* classify = app.add_subcommand("classify", "cluster reconstructed spikes and score accuracy");
  add_key_flags(classify, classify_flags);

  auto* cosparsity = app.add_subcommand("co-sparsity", "co-sparsity curves and histograms per order");
  add_key_flags(cosparsity, cosparsity_flags);

  auto* check = app.add_subcommand("convert-check", "load a converted dataset and summarize it");
  check->add_option("path", check_path, "spike CSV or raw binary file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*check) return convert_check(check_path);

    if (*synth) {
      const auto config = resolve(synth, synth_flags);
      std::cout << "wrote " << cosparse::run_synth(config, synth_format).string() << '\n';
    } else if (*train) {
      const auto config = resolve(train, train_flags);
      const auto r = cosparse::run_training(config);
      const auto& m = r.outcome.model;
      std::cout << "a=" << m.a << " b=" << m.b << " c=" << m.c << " residual=" << m.residual << '\n';
      print_files(r.files);
    } else if (*sweep) {
      const auto config = resolve(sweep, sweep_flags);
      const auto r = cosparse::run_sweep(config);
      for (const auto& ms : r.methods)
        for (const auto& rep : ms.pooled)
          std::cout << ms.method << " M=" << rep.num_measurements << " mean_prd=" << rep.mean_prd
                    << " good=" << rep.good_probability << '\n';
      print_files(r.files);
    } else if (*classify) {
      const auto config = resolve(classify, classify_flags);
      const auto r = cosparse::run_classification(config);
      for (const auto& o : r.outcomes)
        std::cout << o.method << " accuracy=" << o.report.accuracy << " mean_prd=" << o.mean_prd << '\n';
      print_files(r.files);
    } else if (*cosparsity) {
      const auto config = resolve(cosparsity, cosparsity_flags);
      const auto c = cosparse::run_cosparsity(config);
      for (std::size_t i = 0; i < c.orders.size(); ++i)
        std::cout << "order=" << c.orders[i] << " mean_cosparsity=" << c.mean[i] << '\n';
    }
  } catch (const cosparse::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
