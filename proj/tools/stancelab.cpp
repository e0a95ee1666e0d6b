#include <cstdio>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "stancelab/pipeline.hpp"

using namespace stancelab;

namespace {

struct StageArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  bool skip_fresh = false;
};

void add_stage_options(CLI::App* cmd, StageArgs& args) {
  cmd->add_option("--config", args.config, "Pipeline config file (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", args.seed, "Override rng_seed");
  cmd->add_flag("--skip-fresh", args.skip_fresh, "Skip stages whose inputs are unchanged since the last run");
}

void report(const StageResult& r) {
  if (r.skipped)
    std::printf("%-10s fresh, skipped\n", std::string(to_string(r.stage)).c_str());
  else
    std::printf("%-10s %.2f s, %zu outputs\n", std::string(to_string(r.stage)).c_str(), r.seconds, r.outputs.size());
}

Corpus read_input(const std::string& path) { return load_corpus(path); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stance and stance-turnaround analysis of micro-blogging debates"};
  app.require_subcommand(1);

  StageArgs stage_args;
  std::optional<Stage> chosen;
  bool run_all = false;
  for (Stage s : kAllStages) {
    CLI::App* cmd = app.add_subcommand(std::string(to_string(s)), "Run the " + std::string(to_string(s)) + " stage");
    add_stage_options(cmd, stage_args);
    cmd->callback([&chosen, s] { chosen = s; });
  }
  CLI::App* all = app.add_subcommand("all", "Run every stage in order");
  add_stage_options(all, stage_args);
  all->callback([&run_all] { run_all = true; });

  CLI::App* corpus = app.add_subcommand("corpus", "Corpus utilities");
  corpus->require_subcommand(1);
  std::string c_input, c_out, c_from, c_to, c_terms, c_exclude;
  CLI::App* load = corpus->add_subcommand("load", "Load, validate and restrict a corpus to a date range");
  load->add_option("--input", c_input)->required()->check(CLI::ExistingFile);
  load->add_option("--from", c_from, "First day (YYYY-MM-DD)");
  load->add_option("--to", c_to, "Last day (YYYY-MM-DD)");
  load->add_option("--out", c_out)->required();
  CLI::App* filter = corpus->add_subcommand("filter", "Keep posts matching the include terms and no exclude pattern");
  filter->add_option("--input", c_input)->required()->check(CLI::ExistingFile);
  filter->add_option("--terms", c_terms)->required()->check(CLI::ExistingFile);
  filter->add_option("--exclude", c_exclude)->check(CLI::ExistingFile);
  filter->add_option("--out", c_out)->required();
  CLI::App* lcc = corpus->add_subcommand("lcc", "Restrict to the largest connected interaction component");
  lcc->add_option("--input", c_input)->required()->check(CLI::ExistingFile);
  lcc->add_option("--out", c_out)->required();

  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic corpus with ground truth");
  std::string s_spec, s_out;
  std::optional<std::uint64_t> s_seed;
  synth->add_option("--spec", s_spec, "Synthetic spec (JSON)")->required()->check(CLI::ExistingFile);
  synth->add_option("--out", s_out, "Output directory")->required();
  synth->add_option("--seed", s_seed, "Override rng_seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (chosen || run_all) {
      PipelineConfig config = load_config(stage_args.config);
      if (stage_args.seed) apply_seed(config, *stage_args.seed);
      Pipeline pipeline(std::move(config));
      RunOptions options;
      options.skip_fresh = stage_args.skip_fresh;
      if (run_all)
        for (Stage s : kAllStages) report(pipeline.run(s, options));
      else
        report(pipeline.run(*chosen, options));
      return 0;
    }
    if (load->parsed()) {
      LoadOptions o;
      if (!c_from.empty() || !c_to.empty()) {
        if (c_from.empty() || c_to.empty()) throw Error("corpus load: give both --from and --to");
        o.time_range = TimeRange{parse_date(c_from), parse_date_end(c_to)};
      }
      LoadReport rep;
      const Corpus c = load_corpus(c_input, o, &rep);
      save_corpus(c, c_out);
      std::printf("%zu posts, %zu users; %zu malformed, %zu out of range\n", c.posts.size(), c.users.size(),
                  rep.malformed, rep.out_of_range);
      for (const std::string& w : rep.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
      return 0;
    }
    if (filter->parsed()) {
      const Corpus c = filter_relevant(read_input(c_input), load_term_list(c_terms),
                                       c_exclude.empty() ? std::vector<std::string>{} : load_term_list(c_exclude));
      save_corpus(c, c_out);
      std::printf("%zu posts, %zu users\n", c.posts.size(), c.users.size());
      return 0;
    }
    if (lcc->parsed()) {
      const Corpus in = read_input(c_input);
      const Corpus c = restrict_users(in, largest_connected_component(build_interaction_graph(in)));
      save_corpus(c, c_out);
      std::printf("%zu of %zu users in the largest component\n", c.users.size(), in.users.size());
      return 0;
    }
    if (synth->parsed()) {
      SynthSpec spec = load_synth_spec(s_spec);
      if (s_seed) spec.rng_seed = *s_seed;
      const SynthOutput out = generate(spec);
      write_synth_output(out, s_out);
      std::printf("%zu users, %zu posts written to %s\n", out.corpus.users.size(), out.corpus.posts.size(),
                  s_out.c_str());
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
