#include "dmtn/babi.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "dmtn/errors.hpp"

namespace dmtn::babi {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

Tokens tokenize(std::string_view text) {
  Tokens out;
  std::istringstream in{std::string(text)};
  std::string word;
  while (in >> word) {
    while (!word.empty() && (word.back() == '.' || word.back() == '?')) word.pop_back();
    if (!word.empty()) out.push_back(lower(word));
  }
  return out;
}

std::vector<std::string_view> split_tabs(std::string_view s) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (;;) {
    const std::size_t tab = s.find('\t', start);
    parts.push_back(s.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return parts;
}

std::vector<std::size_t> parse_supports(std::string_view field, std::size_t line_no) {
  std::vector<std::size_t> out;
  std::istringstream in{std::string(field)};
  std::string item;
  while (in >> item) {
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc() || ptr != item.data() + item.size() || v == 0) {
      throw ParseError(line_no, "bad supporting-fact number '" + item + "'");
    }
    out.push_back(v);
  }
  return out;
}

}  // namespace

std::vector<Story> parse_task_file(std::string_view text) {
  std::vector<Story> stories;
  std::size_t file_line = 0;
  std::size_t last_number = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view raw = text.substr(pos, end - pos);
    pos = end + 1;
    ++file_line;
    if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
    if (trim(raw).empty()) continue;

    std::string_view line = raw;
    while (!line.empty() && line.front() == ' ') line.remove_prefix(1);
    std::size_t number = 0;
    const auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), number);
    if (ec != std::errc() || ptr == line.data() || number == 0) {
      throw ParseError(file_line, "expected a leading line number");
    }
    const std::string_view body = line.substr(static_cast<std::size_t>(ptr - line.data()));
    if (body.empty() || body.front() != ' ') {
      throw ParseError(file_line, "expected a space after the line number");
    }

    if (number == 1) {
      stories.emplace_back();
    } else if (stories.empty() || number <= last_number) {
      throw ParseError(file_line, "line number " + std::to_string(number) +
                                      " does not continue a story");
    }
    last_number = number;
    Story& story = stories.back();

    const auto fields = split_tabs(body);
    const bool is_question = fields.size() > 1;
    if (!is_question && body.find('?') != std::string_view::npos) {
      throw ParseError(file_line, "question is missing its tab-separated answer");
    }

    Sentence sentence;
    sentence.line = number;
    sentence.is_question = is_question;
    sentence.tokens = tokenize(fields[0]);
    if (sentence.tokens.empty()) throw ParseError(file_line, "empty sentence");

    if (is_question) {
      QASample qa;
      qa.question = sentence.tokens;
      qa.answer = lower(trim(fields[1]));
      if (qa.answer.empty()) throw ParseError(file_line, "empty answer");
      if (fields.size() > 2) qa.supporting_facts = parse_supports(fields[2], file_line);
      for (std::size_t i = 0; i < story.sentences.size(); ++i) {
        if (!story.sentences[i].is_question) qa.context.push_back(i);
      }
      for (std::size_t s : qa.supporting_facts) {
        const bool ok = std::any_of(story.sentences.begin(), story.sentences.end(),
                                    [s](const Sentence& x) { return x.line == s && !x.is_question; });
        if (!ok) {
          throw ParseError(file_line, "supporting fact " + std::to_string(s) +
                                          " is not an earlier statement");
        }
      }
      story.qas.push_back(std::move(qa));
    }
    story.sentences.push_back(std::move(sentence));
  }
  return stories;
}

std::string join(const Tokens& tokens, char sep) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += sep;
    out += tokens[i];
  }
  return out;
}

std::string render_stories(const std::vector<Story>& stories) {
  std::ostringstream os;
  for (const Story& story : stories) {
    std::size_t next_qa = 0;
    for (const Sentence& s : story.sentences) {
      os << s.line << ' ' << join(s.tokens);
      if (s.is_question) {
        const QASample& qa = story.qas.at(next_qa++);
        os << "?\t" << qa.answer << '\t';
        for (std::size_t i = 0; i < qa.supporting_facts.size(); ++i) {
          if (i) os << ' ';
          os << qa.supporting_facts[i];
        }
      } else {
        os << '.';
      }
      os << '\n';
    }
  }
  return os.str();
}

std::size_t count_samples(const std::vector<Story>& stories) {
  std::size_t n = 0;
  for (const Story& s : stories) n += s.qas.size();
  return n;
}

Vocabulary::Vocabulary() {
  add(std::string(kPadToken));
  add(std::string(kEosToken));
}

Vocabulary::Vocabulary(std::vector<std::string> tokens) {
  if (tokens.size() < 2 || tokens[0] != kPadToken || tokens[1] != kEosToken) {
    throw VocabularyError("vocabulary must start with the reserved <pad> and <eos> tokens");
  }
  for (const auto& t : tokens) {
    if (ids_.count(t)) throw VocabularyError("duplicate vocabulary token '" + t + "'");
    add(t);
  }
}

std::size_t Vocabulary::add(const std::string& token) {
  if (auto it = ids_.find(token); it != ids_.end()) return it->second;
  const std::size_t id = tokens_.size();
  tokens_.push_back(token);
  ids_.emplace(token, id);
  return id;
}

bool Vocabulary::contains(std::string_view token) const {
  return ids_.find(std::string(token)) != ids_.end();
}

std::size_t Vocabulary::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  if (it == ids_.end()) throw VocabularyError("unknown token '" + std::string(token) + "'");
  return it->second;
}

const std::string& Vocabulary::token(std::size_t id) const {
  if (id >= tokens_.size()) throw VocabularyError("token id " + std::to_string(id) + " out of range");
  return tokens_[id];
}

Vocabulary build_vocabulary(const std::vector<Story>& train, const std::vector<Story>& test) {
  Vocabulary vocab;
  for (const auto* split : {&train, &test}) {
    for (const Story& story : *split) {
      std::size_t next_qa = 0;
      for (const Sentence& s : story.sentences) {
        for (const auto& t : s.tokens) vocab.add(t);
        if (s.is_question) vocab.add(story.qas.at(next_qa++).answer);
      }
    }
  }
  return vocab;
}

EncodedSample encode_sample(const Story& story, const QASample& qa, const Vocabulary& vocab) {
  EncodedSample out;
  for (std::size_t idx : qa.context) {
    for (const auto& t : story.sentences.at(idx).tokens) out.input_ids.push_back(vocab.id(t));
    out.eos_positions.push_back(out.input_ids.size());
    out.input_ids.push_back(Vocabulary::kEosId);
  }
  for (const auto& t : qa.question) out.question_ids.push_back(vocab.id(t));
  out.answer_id = vocab.id(qa.answer);
  out.supporting_facts = qa.supporting_facts;
  return out;
}

std::vector<SampleRef> sample_refs(const std::vector<Story>& stories) {
  std::vector<SampleRef> refs;
  for (std::size_t s = 0; s < stories.size(); ++s)
    for (std::size_t q = 0; q < stories[s].qas.size(); ++q) refs.push_back({s, q});
  return refs;
}

std::vector<EncodedSample> encode_all(const std::vector<Story>& stories, const Vocabulary& vocab) {
  std::vector<EncodedSample> out;
  for (const SampleRef& r : sample_refs(stories)) {
    out.push_back(encode_sample(stories[r.story], stories[r.story].qas[r.qa], vocab));
  }
  return out;
}

std::filesystem::path task_file(const std::filesystem::path& root, int task, Split split) {
  namespace fs = std::filesystem;
  if (task < 1 || task > 20) throw ArgumentError("task must be in [1, 20], got " + std::to_string(task));
  fs::path dir = fs::is_directory(root / "en") ? root / "en" : root;
  if (!fs::is_directory(dir)) throw IoError("bAbI data directory not found: " + root.string());
  const std::string prefix = "qa" + std::to_string(task) + "_";
  const std::string suffix = split == Split::kTrain ? "_train.txt" : "_test.txt";
  std::vector<fs::path> matches;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.starts_with(prefix) && name.ends_with(suffix)) matches.push_back(entry.path());
  }
  if (matches.empty()) {
    throw IoError("no " + prefix + "*" + suffix + " file in " + dir.string());
  }
  if (matches.size() > 1) throw IoError("ambiguous task files for " + prefix + " in " + dir.string());
  return matches.front();
}

std::vector<Story> load_task_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_task_file(buf.str());
}

TaskData load_task(const std::filesystem::path& root, int task) {
  TaskData data;
  data.task = task;
  data.train = load_task_file(task_file(root, task, Split::kTrain));
  data.test = load_task_file(task_file(root, task, Split::kTest));
  return data;
}

}  // namespace dmtn::babi
