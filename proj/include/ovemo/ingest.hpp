#pragma once

// Video ingestion adapter. Shells out to an external frame extractor
// (ffmpeg-compatible command line) and rewrites media_ref/n_frames so the rest
// of the pipeline only ever sees frame directories.
//
//   <tool> -hide_banner -loglevel error -i <video> <out>/frames/<id>/%06d.jpg

#include <array>
#include <cstdio>
#include <cstdlib>
#include <memory>
#include <sstream>
#include <string>

#include <unistd.h>

#include "ovemo/core.hpp"
#include "ovemo/error.hpp"
#include "ovemo/jsonl.hpp"

namespace ovemo {

namespace detail {

inline std::string shell_quote(const std::string& arg) {
  std::string out = "'";
  for (char c : arg) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out.push_back(c);
    }
  }
  out += "'";
  return out;
}

inline std::string run_capture(const std::string& command, int& status) {
  std::unique_ptr<FILE, int (*)(FILE*)> pipe(popen(command.c_str(), "r"), pclose);
  if (!pipe) throw Error(ErrorCode::kIo, "cannot run: " + command);
  std::string out;
  std::array<char, 4096> buf{};
  while (std::size_t n = std::fread(buf.data(), 1, buf.size(), pipe.get())) out.append(buf.data(), n);
  status = pclose(pipe.release());
  return out;
}

}  // namespace detail

// Resolves `tool` on PATH (or as a path). Empty when not found.
inline fs::path find_tool(const std::string& tool) {
  if (tool.find('/') != std::string::npos) {
    return ::access(tool.c_str(), X_OK) == 0 ? fs::path(tool) : fs::path();
  }
  const char* path_env = std::getenv("PATH");
  std::stringstream dirs(path_env ? path_env : "");
  std::string dir;
  while (std::getline(dirs, dir, ':')) {
    if (dir.empty()) continue;
    const fs::path candidate = fs::path(dir) / tool;
    if (::access(candidate.c_str(), X_OK) == 0) return candidate;
  }
  return {};
}

struct IngestResult {
  DatasetManifest manifest;  // media_ref points at frame directories
  std::string tool;
  std::string tool_version;
  std::size_t extracted = 0;
};

inline IngestResult ingest_manifest(const DatasetManifest& input, const fs::path& input_dir,
                                    const fs::path& out_dir, const std::string& tool) {
  const fs::path tool_path = find_tool(tool);
  if (tool_path.empty()) {
    throw Error(ErrorCode::kToolMissing, "frame extractor '" + tool + "' not found on PATH");
  }
  IngestResult result;
  result.tool = tool_path.string();
  int status = 0;
  const std::string version =
      detail::run_capture(detail::shell_quote(result.tool) + " -version 2>&1", status);
  result.tool_version = version.substr(0, version.find('\n'));
  result.manifest.split = input.split;

  for (const auto& record : input.records) {
    SampleRecord out = record;
    const fs::path media = fs::path(record.media_ref).is_absolute()
                               ? fs::path(record.media_ref)
                               : input_dir / record.media_ref;
    fs::path frames_dir;
    std::string frames_ref;
    if (fs::is_directory(media)) {
      frames_dir = media;
      frames_ref = fs::absolute(media).lexically_normal().string();
    } else {
      if (!fs::is_regular_file(media)) {
        throw Error(ErrorCode::kIo, "sample '" + record.id + "': media not found " + media.string());
      }
      frames_ref = "frames/" + std::string(record.id);
      for (auto& c : frames_ref) {
        if (c == '\\' || c == ':') c = '_';
      }
      frames_dir = out_dir / frames_ref;
      fs::remove_all(frames_dir);
      fs::create_directories(frames_dir);
      const std::string cmd = detail::shell_quote(result.tool) +
                              " -hide_banner -loglevel error -i " +
                              detail::shell_quote(media.string()) + " " +
                              detail::shell_quote((frames_dir / "%06d.jpg").string()) + " 2>&1";
      const std::string log = detail::run_capture(cmd, status);
      if (status != 0) {
        throw Error(ErrorCode::kIo, "frame extraction failed for '" + record.id + "': " + log);
      }
      ++result.extracted;
    }
    out.media_ref = frames_ref;
    out.n_frames = static_cast<std::int64_t>(detail::list_frames(frames_dir).size());
    if (out.n_frames == 0) {
      throw Error(ErrorCode::kIo, "sample '" + record.id + "': no frames in " + frames_dir.string());
    }
    result.manifest.records.push_back(std::move(out));
  }
  return result;
}

}  // namespace ovemo
