#pragma once

// bAbI task files: parsing, vocabulary, and token-id encoding.
//
// Line format, one record per line:
//   N sentence.
//   N question?<TAB>answer<TAB>supporting line numbers
// A line numbered 1 starts a new story.

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace dmtn::babi {

using Tokens = std::vector<std::string>;

struct Sentence {
  std::size_t line = 0;  // original 1-based line number within the story
  Tokens tokens;
  bool is_question = false;

  friend bool operator==(const Sentence&, const Sentence&) = default;
};

struct QASample {
  std::vector<std::size_t> context;  // 0-based indices of prior statements in Story::sentences
  Tokens question;
  std::string answer;
  std::vector<std::size_t> supporting_facts;  // 1-based line numbers; never used in training

  friend bool operator==(const QASample&, const QASample&) = default;
};

struct Story {
  std::vector<Sentence> sentences;  // statements and questions, in file order
  std::vector<QASample> qas;

  friend bool operator==(const Story&, const Story&) = default;
};

std::vector<Story> parse_task_file(std::string_view text);

/// Inverse of parse_task_file up to normalization.
std::string render_stories(const std::vector<Story>& stories);

std::size_t count_samples(const std::vector<Story>& stories);

class Vocabulary {
 public:
  static constexpr std::size_t kPadId = 0;
  static constexpr std::size_t kEosId = 1;
  static constexpr std::string_view kPadToken = "<pad>";
  static constexpr std::string_view kEosToken = "<eos>";

  Vocabulary();
  /// Rebuilds from an id-ordered token list whose first two entries are the reserved tokens.
  explicit Vocabulary(std::vector<std::string> tokens);

  std::size_t add(const std::string& token);
  bool contains(std::string_view token) const;
  /// Throws VocabularyError naming the token if it is unknown.
  std::size_t id(std::string_view token) const;
  const std::string& token(std::size_t id) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> ids_;
};

/// First-occurrence order over train then test; closed over both splits.
Vocabulary build_vocabulary(const std::vector<Story>& train, const std::vector<Story>& test);

struct EncodedSample {
  std::vector<std::size_t> input_ids;      // context tokens with an EOS id after each sentence
  std::vector<std::size_t> eos_positions;  // one per context sentence
  std::vector<std::size_t> question_ids;
  std::size_t answer_id = 0;
  std::vector<std::size_t> supporting_facts;

  std::size_t fact_count() const { return eos_positions.size(); }
  friend bool operator==(const EncodedSample&, const EncodedSample&) = default;
};

EncodedSample encode_sample(const Story& story, const QASample& qa, const Vocabulary& vocab);

/// Every QASample of every story, in file order.
std::vector<EncodedSample> encode_all(const std::vector<Story>& stories, const Vocabulary& vocab);

/// Points at one QASample inside a story list.
struct SampleRef {
  std::size_t story = 0;
  std::size_t qa = 0;
};
std::vector<SampleRef> sample_refs(const std::vector<Story>& stories);

enum class Split { kTrain, kTest };

/// Resolves `<root>/en/qa<N>_*_<split>.txt` (or `<root>/qa<N>_*` when there is no `en/`).
std::filesystem::path task_file(const std::filesystem::path& root, int task, Split split);

std::vector<Story> load_task_file(const std::filesystem::path& path);

struct TaskData {
  int task = 0;
  std::vector<Story> train;
  std::vector<Story> test;
};

TaskData load_task(const std::filesystem::path& root, int task);

std::string join(const Tokens& tokens, char sep = ' ');

}  // namespace dmtn::babi
