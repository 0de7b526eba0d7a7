#include "clane/event_ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

namespace clane {

namespace {

std::uint16_t read_u16le(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (std::uint16_t(p[1]) << 8));
}

std::uint64_t read_u64le(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

void put_u16le(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(std::uint8_t(v & 0xff));
  out.push_back(std::uint8_t(v >> 8));
}

void put_u64le(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(std::uint8_t((v >> (8 * i)) & 0xff));
}

[[noreturn]] void parse_fail_at_byte(std::size_t offset, const std::string& what) {
  throw ParseError("event parse error at byte " + std::to_string(offset) + ": " + what);
}

[[noreturn]] void parse_fail_at_line(std::size_t line, const std::string& what) {
  throw ParseError("event parse error at line " + std::to_string(line) + ": " + what);
}

EventStream parse_binary_v1(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 16) parse_fail_at_byte(bytes.size(), "truncated header (need 16 bytes)");
  if (std::memcmp(bytes.data(), "EVT1", 4) != 0) parse_fail_at_byte(0, "bad magic, expected EVT1");

  EventStream s;
  s.sensor_width = read_u16le(bytes.data() + 4);
  s.sensor_height = read_u16le(bytes.data() + 6);
  const std::uint64_t count = read_u64le(bytes.data() + 8);
  if (s.sensor_width == 0 || s.sensor_height == 0)
    parse_fail_at_byte(4, "zero sensor dimension");

  const std::size_t payload = bytes.size() - 16;
  if (payload != count * 13)
    parse_fail_at_byte(16, "payload is " + std::to_string(payload) + " bytes, header declares " +
                               std::to_string(count) + " records of 13 bytes");

  s.events.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::size_t off = 16 + i * 13;
    const std::uint8_t* r = bytes.data() + off;
    Event e;
    e.x = read_u16le(r);
    e.y = read_u16le(r + 2);
    e.t = read_u64le(r + 4);
    const std::uint8_t p = r[12];
    if (p > 1) parse_fail_at_byte(off + 12, "polarity byte must be 0 or 1");
    e.p = p ? 1 : -1;
    if (e.x >= s.sensor_width || e.y >= s.sensor_height)
      parse_fail_at_byte(off, "coordinate (" + std::to_string(e.x) + "," + std::to_string(e.y) +
                                  ") outside sensor " + std::to_string(s.sensor_width) + "x" +
                                  std::to_string(s.sensor_height));
    s.events.push_back(e);
  }
  return s;
}

bool parse_int_field(std::string_view field, std::int64_t& out) {
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && !field.empty();
}

EventStream parse_csv(std::span<const std::uint8_t> bytes, std::uint16_t width,
                      std::uint16_t height) {
  EventStream s;
  s.sensor_width = width;
  s.sensor_height = height;

  std::string_view text(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    std::string_view line = (eol == std::string_view::npos) ? text.substr(pos)
                                                            : text.substr(pos, eol - pos);
    pos = (eol == std::string_view::npos) ? text.size() + 1 : eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line_no == 1) {
      if (line != "x,y,t,p") parse_fail_at_line(1, "header must be \"x,y,t,p\"");
      continue;
    }
    if (line.empty()) continue;

    std::int64_t v[4];
    std::size_t start = 0;
    for (int f = 0; f < 4; ++f) {
      std::size_t comma = line.find(',', start);
      if (f < 3 && comma == std::string_view::npos)
        parse_fail_at_line(line_no, "expected 4 comma-separated fields");
      if (f == 3 && comma != std::string_view::npos)
        parse_fail_at_line(line_no, "expected 4 comma-separated fields");
      std::string_view field =
          (comma == std::string_view::npos) ? line.substr(start) : line.substr(start, comma - start);
      if (!parse_int_field(field, v[f]))
        parse_fail_at_line(line_no, "field " + std::to_string(f) + " is not a decimal integer");
      start = comma + 1;
    }
    if (v[0] < 0 || v[0] >= width || v[1] < 0 || v[1] >= height)
      parse_fail_at_line(line_no, "coordinate (" + std::to_string(v[0]) + "," +
                                      std::to_string(v[1]) + ") outside sensor " +
                                      std::to_string(width) + "x" + std::to_string(height));
    if (v[2] < 0) parse_fail_at_line(line_no, "negative timestamp");
    if (v[3] != 1 && v[3] != -1) parse_fail_at_line(line_no, "polarity must be 1 or -1");
    Event e;
    e.x = static_cast<std::uint16_t>(v[0]);
    e.y = static_cast<std::uint16_t>(v[1]);
    e.t = static_cast<std::uint64_t>(v[2]);
    e.p = static_cast<std::int8_t>(v[3]);
    s.events.push_back(e);
  }
  return s;
}

}  // namespace

void BinningConfig::validate(std::uint16_t sensor_width, std::uint16_t sensor_height) const {
  if (crop_w == 0 || crop_h == 0) throw std::invalid_argument("binning: empty crop");
  if (std::uint32_t(crop_x0) + crop_w > sensor_width ||
      std::uint32_t(crop_y0) + crop_h > sensor_height)
    throw std::invalid_argument("binning: crop exceeds sensor bounds");
  if (out_w == 0 || out_h == 0) throw std::invalid_argument("binning: empty output resolution");
  if (crop_w % out_w != 0 || crop_h % out_h != 0)
    throw std::invalid_argument("binning: crop size must be an integer multiple of out resolution");
  if (window_us == 0) throw std::invalid_argument("binning: window_us must be > 0");
  if (count_clip == 0) throw std::invalid_argument("binning: count_clip must be >= 1");
}

EventStream parse_events(std::span<const std::uint8_t> bytes, EventFormat format,
                         std::uint16_t csv_sensor_width, std::uint16_t csv_sensor_height) {
  EventStream s = (format == EventFormat::binary_v1)
                      ? parse_binary_v1(bytes)
                      : parse_csv(bytes, csv_sensor_width, csv_sensor_height);
  std::stable_sort(s.events.begin(), s.events.end(),
                   [](const Event& a, const Event& b) { return a.t < b.t; });
  return s;
}

std::vector<std::uint8_t> encode_events_binary(const EventStream& stream) {
  std::vector<std::uint8_t> out;
  out.reserve(16 + stream.events.size() * 13);
  out.insert(out.end(), {'E', 'V', 'T', '1'});
  put_u16le(out, stream.sensor_width);
  put_u16le(out, stream.sensor_height);
  put_u64le(out, stream.events.size());
  for (const Event& e : stream.events) {
    put_u16le(out, e.x);
    put_u16le(out, e.y);
    put_u64le(out, e.t);
    out.push_back(e.p > 0 ? 1 : 0);
  }
  return out;
}

EventStream load_event_file(const std::string& path, const std::string& format_hint,
                            std::uint16_t csv_sensor_width, std::uint16_t csv_sensor_height) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open event file: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  EventFormat fmt;
  if (format_hint == "binary_v1") {
    fmt = EventFormat::binary_v1;
  } else if (format_hint == "csv") {
    fmt = EventFormat::csv;
  } else if (format_hint == "auto") {
    fmt = (bytes.size() >= 4 && std::memcmp(bytes.data(), "EVT1", 4) == 0) ? EventFormat::binary_v1
                                                                           : EventFormat::csv;
  } else {
    throw std::invalid_argument("unknown event format: " + format_hint);
  }
  return parse_events(bytes, fmt, csv_sensor_width, csv_sensor_height);
}

FrameSequence bin_to_frames(const EventStream& stream, const BinningConfig& cfg,
                            std::uint64_t t_start, std::uint64_t t_end) {
  cfg.validate(stream.sensor_width, stream.sensor_height);
  if (t_end < t_start) throw std::invalid_argument("binning: t_end < t_start");

  FrameSequence seq;
  seq.config = cfg;
  seq.t_start = t_start;
  seq.t_end = t_end;
  const std::uint64_t n_frames = (t_end - t_start + cfg.window_us - 1) / cfg.window_us;
  if (n_frames > (1ull << 31)) throw std::invalid_argument("binning: span yields too many frames");

  const int px = cfg.pool_x();
  const int py = cfg.pool_y();
  // cell key = ((channel * out_h) + row) * out_w + col, per frame
  std::vector<std::map<std::uint32_t, std::uint64_t>> acc(n_frames);
  for (const Event& e : stream.events) {
    if (e.t < t_start || e.t >= t_end) continue;
    if (e.x < cfg.crop_x0 || e.x >= cfg.crop_x0 + cfg.crop_w) continue;
    if (e.y < cfg.crop_y0 || e.y >= cfg.crop_y0 + cfg.crop_h) continue;
    const std::uint64_t frame = (e.t - t_start) / cfg.window_us;
    const std::uint32_t channel = e.p > 0 ? 0 : 1;
    const std::uint32_t row = (e.y - cfg.crop_y0) / py;
    const std::uint32_t col = (e.x - cfg.crop_x0) / px;
    const std::uint32_t key = (channel * cfg.out_h + row) * cfg.out_w + col;
    acc[frame][key] += 1;
  }

  seq.frames.resize(n_frames);
  for (std::uint64_t f = 0; f < n_frames; ++f) {
    SparseFrame& frame = seq.frames[f];
    frame.index = static_cast<std::uint32_t>(f);
    frame.cells.reserve(acc[f].size());
    for (const auto& [key, count] : acc[f]) {
      FrameCell cell;
      cell.channel = static_cast<std::uint8_t>(key / (std::uint32_t(cfg.out_h) * cfg.out_w));
      cell.row = static_cast<std::uint16_t>((key / cfg.out_w) % cfg.out_h);
      cell.col = static_cast<std::uint16_t>(key % cfg.out_w);
      cell.count = static_cast<std::uint32_t>(std::min<std::uint64_t>(count, cfg.count_clip));
      frame.cells.push_back(cell);
    }
  }
  return seq;
}

FrameSequence bin_to_frames(const EventStream& stream, const BinningConfig& cfg) {
  if (stream.events.empty()) {
    cfg.validate(stream.sensor_width, stream.sensor_height);
    FrameSequence seq;
    seq.config = cfg;
    return seq;
  }
  std::uint64_t t_min = stream.events.front().t;
  std::uint64_t t_max = stream.events.front().t;
  for (const Event& e : stream.events) {
    t_min = std::min(t_min, e.t);
    t_max = std::max(t_max, e.t);
  }
  const std::uint64_t t_start = (t_min / cfg.window_us) * cfg.window_us;
  return bin_to_frames(stream, cfg, t_start, t_max + 1);
}

double sparsity(const FrameSequence& frames) {
  if (frames.frames.empty()) throw std::invalid_argument("sparsity: empty frame sequence");
  std::uint64_t nnz = 0;
  for (const SparseFrame& f : frames.frames) nnz += f.cells.size();
  const double total = double(frames.frames.size()) * 2.0 * frames.config.out_w *
                       frames.config.out_h;
  return 1.0 - double(nnz) / total;
}

void write_frames(std::ostream& out, const FrameSequence& frames) {
  const BinningConfig& c = frames.config;
  out << "FRAMES1 crop_x0=" << c.crop_x0 << " crop_y0=" << c.crop_y0 << " crop_w=" << c.crop_w
      << " crop_h=" << c.crop_h << " window_us=" << c.window_us << " out_w=" << c.out_w
      << " out_h=" << c.out_h << " count_clip=" << c.count_clip << " t_start=" << frames.t_start
      << " t_end=" << frames.t_end << " frames=" << frames.frames.size() << "\n";
  out << "frame,channel,row,col,count\n";
  for (const SparseFrame& f : frames.frames)
    for (const FrameCell& cell : f.cells)
      out << f.index << ',' << int(cell.channel) << ',' << cell.row << ',' << cell.col << ','
          << cell.count << "\n";
}

FrameSequence read_frames(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("frame cache: missing header line");
  std::istringstream header(line);
  std::string magic;
  header >> magic;
  if (magic != "FRAMES1") throw ParseError("frame cache: bad magic, expected FRAMES1");

  FrameSequence seq;
  std::uint64_t n_frames = 0;
  std::string kv;
  while (header >> kv) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos) throw ParseError("frame cache: malformed header field " + kv);
    const std::string key = kv.substr(0, eq);
    const std::uint64_t val = std::stoull(kv.substr(eq + 1));
    BinningConfig& c = seq.config;
    if (key == "crop_x0") c.crop_x0 = std::uint16_t(val);
    else if (key == "crop_y0") c.crop_y0 = std::uint16_t(val);
    else if (key == "crop_w") c.crop_w = std::uint16_t(val);
    else if (key == "crop_h") c.crop_h = std::uint16_t(val);
    else if (key == "window_us") c.window_us = val;
    else if (key == "out_w") c.out_w = std::uint16_t(val);
    else if (key == "out_h") c.out_h = std::uint16_t(val);
    else if (key == "count_clip") c.count_clip = std::uint32_t(val);
    else if (key == "t_start") seq.t_start = val;
    else if (key == "t_end") seq.t_end = val;
    else if (key == "frames") n_frames = val;
    else throw ParseError("frame cache: unknown header field " + key);
  }
  if (!std::getline(in, line) || line != "frame,channel,row,col,count")
    throw ParseError("frame cache: missing column header");

  seq.frames.resize(n_frames);
  for (std::uint64_t f = 0; f < n_frames; ++f) seq.frames[f].index = std::uint32_t(f);

  std::size_t line_no = 2;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::uint64_t v[5];
    std::size_t start = 0;
    for (int i = 0; i < 5; ++i) {
      std::size_t comma = line.find(',', start);
      std::string field = (comma == std::string::npos) ? line.substr(start)
                                                       : line.substr(start, comma - start);
      if ((i < 4) != (comma != std::string::npos))
        throw ParseError("frame cache line " + std::to_string(line_no) + ": expected 5 fields");
      v[i] = std::stoull(field);
      start = comma + 1;
    }
    if (v[0] >= n_frames)
      throw ParseError("frame cache line " + std::to_string(line_no) + ": frame index out of range");
    FrameCell cell;
    cell.channel = std::uint8_t(v[1]);
    cell.row = std::uint16_t(v[2]);
    cell.col = std::uint16_t(v[3]);
    cell.count = std::uint32_t(v[4]);
    seq.frames[v[0]].cells.push_back(cell);
  }
  return seq;
}

void save_frames(const std::string& path, const FrameSequence& frames) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write frame cache: " + path);
  write_frames(out, frames);
}

FrameSequence load_frames(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open frame cache: " + path);
  return read_frames(in);
}

}  // namespace clane
