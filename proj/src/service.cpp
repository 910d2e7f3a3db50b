#include "ataseg/service.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <future>
#include <mutex>
#include <optional>
#include <map>
#include <thread>
#include <variant>

#include <httplib.h>

#include "ataseg/adapter.hpp"
#include "ataseg/error.hpp"
#include "ataseg/experiment.hpp"
#include "ataseg/io.hpp"
#include "ataseg/summary.hpp"

namespace ataseg {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

std::string to_string(Phase phase) {
  switch (phase) {
    case Phase::kIdle:
      return "idle";
    case Phase::kAwaitingLabels:
      return "awaiting_labels";
    case Phase::kAdapting:
      return "adapting";
    case Phase::kFinished:
      return "finished";
  }
  return "unknown";
}

namespace {

struct Reply {
  int status = 200;
  json body;
};

struct Command {
  enum class Kind { kStart, kLabels, kStop } kind;
  json body;
  std::int64_t expected_frame = -1;
  std::promise<Reply> reply;
};

class CommandQueue {
 public:
  void push(std::unique_ptr<Command> cmd) {
    {
      std::lock_guard lock(mu_);
      items_.push_back(std::move(cmd));
    }
    cv_.notify_one();
  }

  std::unique_ptr<Command> pop() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return !items_.empty(); });
    return take();
  }

  // nullptr on deadline.
  std::unique_ptr<Command> pop_until(Clock::time_point deadline) {
    std::unique_lock lock(mu_);
    if (!cv_.wait_until(lock, deadline, [&] { return !items_.empty(); })) return nullptr;
    return take();
  }

 private:
  std::unique_ptr<Command> take() {
    auto cmd = std::move(items_.front());
    items_.pop_front();
    return cmd;
  }

  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::unique_ptr<Command>> items_;
};

struct Pending {
  std::int64_t frame_id = 0;
  int domain_id = 0;
  std::vector<Pixel> query;
  int height = 0;
  int width = 0;
  std::string image_png;
  std::string prediction_png;
};

struct Snapshot {
  Phase phase = Phase::kIdle;
  std::int64_t frames_done = 0;
  std::optional<Pending> pending;
  json metrics = json{{"no_data", true}};
  std::string error;
};

struct StopRequested {};

std::string to_bytes(const std::vector<std::uint8_t>& v) { return std::string(v.begin(), v.end()); }

std::string hex_color(const std::vector<double>& rgb) {
  char buf[8];
  auto c = [](double x) { return static_cast<int>(std::lround(std::clamp(x, 0.0, 1.0) * 255)); };
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c(rgb[0]), c(rgb[1]), c(rgb[2]));
  return buf;
}

// Checks a label submission against the pending query. Returns the classes in
// query order, or an error reply.
std::variant<std::vector<int>, Reply> check_labels(const json& body, const Pending& pending,
                                                   int num_classes) {
  auto bad = [](int status, const std::string& msg) {
    return Reply{status, {{"error", msg}}};
  };
  const json* list = &body;
  if (body.is_object()) {
    if (!body.contains("labels")) return bad(422, "missing labels");
    list = &body.at("labels");
  }
  if (!list->is_array()) return bad(422, "labels must be an array");
  if (list->size() != pending.query.size()) {
    return bad(422, "expected " + std::to_string(pending.query.size()) + " labels, got " +
                        std::to_string(list->size()));
  }
  std::map<std::pair<int, int>, std::size_t> index;
  for (std::size_t i = 0; i < pending.query.size(); ++i) {
    index[{pending.query[i].row, pending.query[i].col}] = i;
  }
  std::vector<int> classes(pending.query.size(), -1);
  for (const auto& e : *list) {
    if (!e.is_object() || !e.contains("row") || !e.contains("col") || !e.contains("class_id") ||
        !e["row"].is_number_integer() || !e["col"].is_number_integer() ||
        !e["class_id"].is_number_integer()) {
      return bad(422, "each label needs integer row, col and class_id");
    }
    const int r = e["row"].get<int>(), c = e["col"].get<int>(), k = e["class_id"].get<int>();
    auto it = index.find({r, c});
    if (it == index.end()) {
      return bad(422, "pixel (" + std::to_string(r) + "," + std::to_string(c) + ") was not queried");
    }
    if (classes[it->second] != -1) {
      return bad(422, "pixel (" + std::to_string(r) + "," + std::to_string(c) + ") labelled twice");
    }
    if (k < 0 || k >= num_classes) return bad(422, "class_id " + std::to_string(k) + " out of range");
    classes[it->second] = k;
  }
  return classes;
}

}  // namespace

struct AnnotationService::Impl {
  ExperimentConfig cfg;
  SegNet source;
  std::uint64_t seed;
  StreamSpec spec;
  std::vector<StreamFrame> stream;
  std::string session_id;

  CommandQueue queue;
  std::thread worker;
  httplib::Server server;
  std::thread server_thread;

  mutable std::mutex mu;
  std::condition_variable events_cv;
  std::shared_ptr<const Snapshot> snapshot = std::make_shared<Snapshot>();
  std::vector<json> events;
  bool stopping = false;
  std::vector<double> final_params;
  json final_summary;

  Impl(ExperimentConfig c, SegNet s, std::uint64_t sd)
      : cfg(std::move(c)), source(std::move(s)), seed(sd) {
    cfg.validate();
    if (cfg.multi_session) throw ConfigError("multi_session: only one session per service is supported");
    if (source.num_classes() != cfg.stream.num_classes) {
      throw ConfigError("stream.num_classes: does not match the source network");
    }
    spec = stream_for_seed(cfg.stream, seed);
    stream = build_stream(spec);
    session_id = "session-" + std::to_string(seed);
    routes();
    worker = std::thread([this] { worker_main(); });
  }

  std::shared_ptr<const Snapshot> read() const {
    std::lock_guard lock(mu);
    return snapshot;
  }

  void publish(Snapshot next, const std::string& event, std::optional<std::int64_t> frame) {
    {
      std::lock_guard lock(mu);
      json ev = {{"seq", events.size()}, {"event", event}, {"phase", to_string(next.phase)},
                 {"frames_done", next.frames_done}};
      ev["frame_id"] = frame ? json(*frame) : json(nullptr);
      events.push_back(std::move(ev));
      snapshot = std::make_shared<const Snapshot>(std::move(next));
    }
    events_cv.notify_all();
  }

  Reply send(Command::Kind kind, json body = {}, std::int64_t expected = -1) {
    auto cmd = std::make_unique<Command>();
    cmd->kind = kind;
    cmd->body = std::move(body);
    cmd->expected_frame = expected;
    auto fut = cmd->reply.get_future();
    queue.push(std::move(cmd));
    if (fut.wait_for(std::chrono::seconds(60)) != std::future_status::ready) {
      return {503, {{"error", "session worker unavailable"}}};
    }
    return fut.get();
  }

  // Oracle answering from label submissions.
  class HumanOracle : public Oracle {
   public:
    HumanOracle(Impl& impl, const Session& session) : impl_(impl), session_(session) {}

    std::optional<std::vector<int>> answer(const StreamFrame& frame,
                                           std::span<const Pixel> query) override {
      Pending p;
      p.frame_id = frame.frame_id;
      p.domain_id = frame.domain_id;
      p.query.assign(query.begin(), query.end());
      p.height = static_cast<int>(frame.scene.image.shape()[0]);
      p.width = static_cast<int>(frame.scene.image.shape()[1]);
      p.image_png = to_bytes(encode_png(frame.scene.image));
      const auto pred = predict(session_.net, frame.scene.image,
                                uses_flip_view(impl_.cfg.adapter.kind));
      p.prediction_png = to_bytes(encode_label_png(pred.hard_labels(), p.height, p.width));

      Snapshot s = *impl_.read();
      s.phase = Phase::kAwaitingLabels;
      s.pending = p;
      impl_.publish(s, "awaiting_labels", frame.frame_id);

      const auto deadline =
          Clock::now() + std::chrono::duration_cast<Clock::duration>(
                             std::chrono::duration<double>(impl_.cfg.oracle.timeout_s));
      while (true) {
        auto cmd = impl_.queue.pop_until(deadline);
        if (!cmd) {
          s.phase = Phase::kAdapting;
          s.pending.reset();
          impl_.publish(s, "timeout", frame.frame_id);
          return std::nullopt;
        }
        switch (cmd->kind) {
          case Command::Kind::kStop:
            cmd->reply.set_value({503, {{"error", "stopping"}}});
            throw StopRequested{};
          case Command::Kind::kStart:
            cmd->reply.set_value({409, {{"error", "session already started"}}});
            break;
          case Command::Kind::kLabels: {
            if (cmd->expected_frame != -1 && cmd->expected_frame != p.frame_id) {
              cmd->reply.set_value(
                  {409, {{"error", "frame " + std::to_string(cmd->expected_frame) +
                                       " is not pending"}}});
              break;
            }
            auto checked = check_labels(cmd->body, p, impl_.spec.num_classes);
            if (auto* err = std::get_if<Reply>(&checked)) {
              cmd->reply.set_value(*err);
              break;
            }
            cmd->reply.set_value({200, {{"accepted", true}, {"frame_id", p.frame_id}}});
            s.phase = Phase::kAdapting;
            s.pending.reset();
            impl_.publish(s, "labels_accepted", frame.frame_id);
            return std::get<std::vector<int>>(std::move(checked));
          }
        }
      }
    }

   private:
    Impl& impl_;
    const Session& session_;
  };

  RunLabel run_label() const {
    RunLabel l;
    l.adapter = to_string(cfg.adapter.kind);
    l.annotator = to_string(cfg.annotator.kind);
    l.budget = cfg.adapter.budget;
    l.seed = seed;
    l.lr = cfg.optimizer.lr;
    return l;
  }

  void drain_until_stop() {
    while (true) {
      auto cmd = queue.pop();
      if (cmd->kind == Command::Kind::kStop) {
        cmd->reply.set_value({503, {{"error", "stopping"}}});
        return;
      }
      cmd->reply.set_value({409, {{"error", "session finished"}}});
    }
  }

  void worker_main() {
    while (true) {
      auto cmd = queue.pop();
      if (cmd->kind == Command::Kind::kStop) {
        cmd->reply.set_value({503, {{"error", "stopping"}}});
        return;
      }
      if (cmd->kind == Command::Kind::kLabels) {
        cmd->reply.set_value({409, {{"error", "session not started"}}});
        continue;
      }
      cmd->reply.set_value({200, {{"session_id", session_id}, {"frames", stream.size()}}});
      break;
    }
    Snapshot s;
    s.phase = Phase::kAdapting;
    publish(s, "started", std::nullopt);

    std::vector<FrameRecord> records;
    try {
      Session session(source, cfg.optimizer, seed);
      HumanOracle oracle(*this, session);
      AnnotatorSpec annotator = cfg.annotator;
      annotator.seed = seed;
      FrameObserver observer = [&](const FrameRecord& rec, const Session&) {
        records.push_back(rec);
        Snapshot next;
        next.phase = Phase::kAdapting;
        next.frames_done = static_cast<std::int64_t>(records.size());
        next.metrics = summarize(records, spec, run_label());
        publish(std::move(next), rec.oracle_failed ? "frame_skipped" : "frame_done",
                rec.frame_id);
      };
      run_stream(session, stream, cfg.adapter, annotator, oracle, observer);
      {
        std::lock_guard lock(mu);
        final_params.assign(session.net.params().begin(), session.net.params().end());
      }
    } catch (const StopRequested&) {
      return;
    } catch (const std::exception& e) {
      s.error = e.what();
    }
    s.phase = Phase::kFinished;
    s.frames_done = static_cast<std::int64_t>(records.size());
    s.metrics = summarize(records, spec, run_label());
    {
      std::lock_guard lock(mu);
      final_summary = s.metrics;
    }
    publish(s, "finished", std::nullopt);
    drain_until_stop();
  }

  json session_json(const Snapshot& s) const {
    json j = {{"session_id", session_id},
              {"phase", to_string(s.phase)},
              {"seed", seed},
              {"adapter", to_string(cfg.adapter.kind)},
              {"annotator", to_string(cfg.annotator.kind)},
              {"budget", cfg.adapter.budget},
              {"frames_total", stream.size()},
              {"frames_done", s.frames_done},
              {"timeout_s", cfg.oracle.timeout_s}};
    if (s.pending) {
      json px = json::array();
      for (const auto& p : s.pending->query) px.push_back({{"row", p.row}, {"col", p.col}});
      j["pending"] = {{"frame_id", s.pending->frame_id}, {"pixels", px}};
    } else {
      j["pending"] = nullptr;
    }
    if (!s.error.empty()) j["error"] = s.error;
    return j;
  }

  json frame_json(const Pending& p) const {
    json px = json::array();
    for (const auto& q : p.query) px.push_back({{"row", q.row}, {"col", q.col}});
    json palette = json::array();
    for (int c = 0; c < spec.num_classes; ++c) {
      palette.push_back({{"class_id", c},
                         {"name", c == 0 ? std::string("background") : "class_" + std::to_string(c)},
                         {"color", hex_color(class_color(c, spec.num_classes))}});
    }
    return {{"frame_id", p.frame_id},
            {"domain_id", p.domain_id},
            {"corruption", to_string(spec.segments[p.domain_id].corruption.kind)},
            {"height", p.height},
            {"width", p.width},
            {"image_png_base64", httplib::detail::base64_encode(p.image_png)},
            {"prediction_png_base64", httplib::detail::base64_encode(p.prediction_png)},
            {"queried", px},
            {"palette", palette}};
  }

  static void reply(httplib::Response& res, const Reply& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  }

  void routes() {
    server.Get("/api/session", [this](const httplib::Request&, httplib::Response& res) {
      reply(res, {200, session_json(*read())});
    });
    server.Post("/api/session", [this](const httplib::Request&, httplib::Response& res) {
      reply(res, send(Command::Kind::kStart));
    });
    server.Get("/api/frame", [this](const httplib::Request&, httplib::Response& res) {
      const auto s = read();
      if (s->phase != Phase::kAwaitingLabels || !s->pending) {
        reply(res, {409, {{"error", "no frame is awaiting labels"}, {"phase", to_string(s->phase)}}});
        return;
      }
      reply(res, {200, frame_json(*s->pending)});
    });
    server.Post("/api/labels", [this](const httplib::Request& req, httplib::Response& res) {
      json body;
      try {
        body = json::parse(req.body);
      } catch (const json::parse_error& e) {
        reply(res, {400, {{"error", std::string("invalid JSON: ") + e.what()}}});
        return;
      }
      const auto s = read();
      if (s->phase != Phase::kAwaitingLabels || !s->pending) {
        reply(res, {409, {{"error", "no frame is awaiting labels"}, {"phase", to_string(s->phase)}}});
        return;
      }
      std::int64_t expected = s->pending->frame_id;
      if (body.is_object() && body.contains("frame_id")) {
        if (!body["frame_id"].is_number_integer()) {
          reply(res, {422, {{"error", "frame_id must be an integer"}}});
          return;
        }
        expected = body["frame_id"].get<std::int64_t>();
      }
      reply(res, send(Command::Kind::kLabels, std::move(body), expected));
    });
    server.Get("/api/metrics", [this](const httplib::Request&, httplib::Response& res) {
      reply(res, {200, read()->metrics});
    });
    server.Get("/api/events", [this](const httplib::Request& req, httplib::Response& res) {
      std::size_t from = 0;
      if (req.has_param("since")) from = std::stoul(req.get_param_value("since"));
      auto next = std::make_shared<std::size_t>(from);
      res.set_chunked_content_provider(
          "text/event-stream", [this, next](std::size_t, httplib::DataSink& sink) {
            std::unique_lock lock(mu);
            events_cv.wait_for(lock, std::chrono::milliseconds(500),
                               [&] { return stopping || *next < events.size(); });
            if (stopping) return false;
            bool finished = false;
            std::string out;
            for (; *next < events.size(); ++*next) {
              const auto& ev = events[*next];
              out += "event: " + ev["event"].get<std::string>() + "\ndata: " + ev.dump() + "\n\n";
              finished = finished || ev["event"] == "finished";
            }
            lock.unlock();
            if (!out.empty() && !sink.write(out.data(), out.size())) return false;
            if (finished) {
              sink.done();
              return false;
            }
            return true;
          });
    });
  }

  void shutdown() {
    {
      std::lock_guard lock(mu);
      if (stopping) return;
      stopping = true;
    }
    events_cv.notify_all();
    auto cmd = std::make_unique<Command>();
    cmd->kind = Command::Kind::kStop;
    queue.push(std::move(cmd));
    server.stop();
    if (server_thread.joinable()) server_thread.join();
    if (worker.joinable()) worker.join();
  }
};

AnnotationService::AnnotationService(ExperimentConfig cfg, SegNet source, std::uint64_t seed)
    : impl_(std::make_unique<Impl>(std::move(cfg), std::move(source), seed)) {}

AnnotationService::~AnnotationService() { impl_->shutdown(); }

int AnnotationService::listen(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  impl_->server_thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void AnnotationService::wait() {
  std::unique_lock lock(impl_->mu);
  impl_->events_cv.wait(lock, [&] { return impl_->stopping; });
}

void AnnotationService::stop() { impl_->shutdown(); }

Phase AnnotationService::phase() const { return impl_->read()->phase; }

std::vector<double> AnnotationService::final_params() const {
  std::lock_guard lock(impl_->mu);
  return impl_->final_params;
}

nlohmann::json AnnotationService::final_summary() const {
  std::lock_guard lock(impl_->mu);
  return impl_->final_summary;
}

}  // namespace ataseg
