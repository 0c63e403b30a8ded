// valign_synth: writes a self-contained synthetic audit directory
// (survey, codebook, templates, gold set, capability table, config).

#include <filesystem>
#include <iostream>
#include <map>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "valign/errors.hpp"
#include "valign/io.hpp"
#include "valign/synthetic.hpp"

namespace syn = valign::synthetic;

int main(int argc, char** argv) {
  CLI::App app{"Write a synthetic audit directory"};
  std::string out;
  std::uint64_t seed = 7;
  std::size_t topics = 50;
  std::size_t respondents = 300;
  app.add_option("--out", out, "Output directory")->required();
  app.add_option("--seed", seed, "Random seed");
  app.add_option("--topics", topics, "Number of survey questions")->check(CLI::Range(3, 10000));
  app.add_option("--respondents", respondents, "Respondents per country")->check(CLI::Range(1, 1000000));
  CLI11_PARSE(app, argc, argv);

  try {
    const std::filesystem::path dir(out);
    std::filesystem::create_directories(dir);
    valign::Rng rng(seed);
    const auto qids = syn::question_ids(topics);
    const auto us = syn::uniform_vps(topics, rng);
    syn::Survey survey{qids, {}, true};
    survey.countries = {
        {"US", "en", us, respondents},
        {"GB", "en", syn::correlated_vps(us, 0.7, rng), respondents},
        {"DK", "da", syn::correlated_vps(us, 0.3, rng), respondents},
        {"NL", "nl", syn::correlated_vps(us, 0.3, rng), respondents},
        {"PT", "pt", syn::correlated_vps(us, 0.2, rng), respondents},
        {"BR", "pt", syn::correlated_vps(us, 0.2, rng), respondents},
    };
    const std::vector<std::string> languages{"en", "da", "nl", "pt"};
    syn::write_survey(dir, survey, seed);
    syn::write_templates(dir, languages);
    syn::write_gold(dir, languages, qids);

    struct Model {
      const char* id;
      const char* family;
      double blend;
      double noise;
      double capability;
    };
    const std::vector<Model> models{{"alpha-small", "alpha", 0.2, 0.15, 0.45},
                                    {"alpha-large", "alpha", 0.7, 0.05, 0.80},
                                    {"beta-small", "beta", 0.1, 0.20, 0.40},
                                    {"beta-large", "beta", 0.5, 0.08, 0.70}};
    std::map<std::pair<std::string, std::string>, double> cap;
    for (const auto& m : models) {
      for (std::size_t l = 0; l < languages.size(); ++l) {
        cap[{m.id, languages[l]}] = m.capability - 0.05 * static_cast<double>(l) + 0.01 * rng.uniform();
      }
    }
    syn::write_capability(dir, cap);

    std::string config = fmt::format(
        "# synthetic audit\n"
        "languages = [\"en\", \"da\", \"nl\", \"pt\"]\n"
        "questions = \"codebook.csv\"\n"
        "survey = \"survey.csv\"\n"
        "templates = \"templates.csv\"\n"
        "capability = \"capability.csv\"\n"
        "gold = \"gold.csv\"\n"
        "seed = {}\n"
        "prompts_per_condition = {}\n"
        "repeats = 3\n"
        "baseline_replicates = 100\n"
        "resample_pairs = 20\n"
        "resample_sample_size = 100\n"
        "\n[local_countries]\nen = [\"GB\"]\n\n"
        "[elicit]\nmax_in_flight = 4\n\n"
        "[judge]\nkind = \"rule\"\n",
        seed, 3 * topics);
    for (const auto& m : models) {
      config += fmt::format(
          "\n[[model]]\nid = \"{}\"\nfamily = \"{}\"\nbackend = \"simulator\"\nlatent = \"local\"\n"
          "target = \"country:US\"\nbias_blend = {}\nnoise_sd = {}\n",
          m.id, m.family, m.blend, m.noise);
    }
    valign::io::atomic_write(dir / "config.toml", config);
    std::cout << "wrote synthetic audit to " << dir.string() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
