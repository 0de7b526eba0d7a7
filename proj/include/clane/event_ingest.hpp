#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace clane {

/// A single event-camera event. Timestamps are microseconds, polarity is +1 or -1.
struct Event {
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  std::uint64_t t = 0;
  std::int8_t p = 1;
};

/// Time-ordered event record with the sensor geometry it was captured on.
/// Events are sorted by t (ties keep input order) and all coordinates lie
/// inside [0, sensor_width) x [0, sensor_height).
struct EventStream {
  std::uint16_t sensor_width = 0;
  std::uint16_t sensor_height = 0;
  std::vector<Event> events;
};

/// Crop + temporal binning + spatial pooling parameters.
/// Defaults mirror a 1280x800 sensor with a central 600x600 crop pooled to
/// 100x100 at 40 ms windows (25 Hz).
struct BinningConfig {
  std::uint16_t crop_x0 = 340;
  std::uint16_t crop_y0 = 100;
  std::uint16_t crop_w = 600;
  std::uint16_t crop_h = 600;
  std::uint64_t window_us = 40000;
  std::uint16_t out_w = 100;
  std::uint16_t out_h = 100;
  std::uint32_t count_clip = 255;  // per-cell saturation bound

  int pool_x() const { return crop_w / out_w; }
  int pool_y() const { return crop_h / out_h; }

  /// Throws std::invalid_argument unless the crop fits the sensor, the crop is
  /// an integer multiple of the output resolution, window_us > 0 and
  /// count_clip >= 1.
  void validate(std::uint16_t sensor_width, std::uint16_t sensor_height) const;
};

/// One nonzero histogram cell. channel 0 = positive polarity, 1 = negative.
struct FrameCell {
  std::uint8_t channel = 0;
  std::uint16_t row = 0;
  std::uint16_t col = 0;
  std::uint32_t count = 0;
};

/// Sparse two-channel event-count histogram for one temporal window.
/// Cells are sorted by (channel, row, col) and keys are unique.
struct SparseFrame {
  std::uint32_t index = 0;
  std::vector<FrameCell> cells;
};

/// Contiguous windows covering [t_start, t_end). Frame i holds events with
/// t in [t_start + i*window_us, t_start + (i+1)*window_us).
struct FrameSequence {
  BinningConfig config;
  std::uint64_t t_start = 0;
  std::uint64_t t_end = 0;
  std::vector<SparseFrame> frames;
};

enum class EventFormat { binary_v1, csv };

/// Parse failure; the message carries a byte offset (binary) or line number (csv).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Decode an event file.
///
/// binary_v1: 16-byte header = magic "EVT1", width u16 LE, height u16 LE,
/// event count u64 LE; then 13-byte records x u16, y u16, t u64, p u8
/// (1 = positive, 0 = negative).
///
/// csv: header line "x,y,t,p", then decimal rows with p in {1,-1}. CSV files
/// carry no geometry, so the sensor size is taken from csv_sensor_* (defaults
/// match a CeleX-V 1280x800 array).
///
/// The returned stream is stably sorted by t. Out-of-bounds coordinates throw
/// ParseError.
EventStream parse_events(std::span<const std::uint8_t> bytes, EventFormat format,
                         std::uint16_t csv_sensor_width = 1280,
                         std::uint16_t csv_sensor_height = 800);

/// Serialize to the binary_v1 layout above (polarity +1 -> 1, -1 -> 0).
std::vector<std::uint8_t> encode_events_binary(const EventStream& stream);

/// Read a whole file and parse it; format_hint "auto" sniffs the EVT1 magic.
EventStream load_event_file(const std::string& path, const std::string& format_hint = "auto",
                            std::uint16_t csv_sensor_width = 1280,
                            std::uint16_t csv_sensor_height = 800);

/// Bin a stream into sparse per-polarity count histograms over an explicit
/// span [t_start, t_end). Events outside the span or the crop are dropped;
/// cell counts saturate at cfg.count_clip. Frames with no events are present
/// but empty.
FrameSequence bin_to_frames(const EventStream& stream, const BinningConfig& cfg,
                            std::uint64_t t_start, std::uint64_t t_end);

/// Same, deriving the span from the stream: t_start is the earliest timestamp
/// rounded down to a multiple of window_us, t_end is the latest timestamp + 1.
/// An empty stream yields an empty sequence.
FrameSequence bin_to_frames(const EventStream& stream, const BinningConfig& cfg);

/// 1 - nnz / (frames * 2 * W * H). Throws std::invalid_argument on an empty
/// sequence.
double sparsity(const FrameSequence& frames);

/// Text cache format: one "FRAMES1 k=v ..." header line, a column header, then
/// one "frame,channel,row,col,count" row per nonzero cell.
void write_frames(std::ostream& out, const FrameSequence& frames);
FrameSequence read_frames(std::istream& in);
void save_frames(const std::string& path, const FrameSequence& frames);
FrameSequence load_frames(const std::string& path);

}  // namespace clane
