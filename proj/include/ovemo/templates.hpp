#pragma once

// Built-in prompt templates.
//
//   zero_shot  multi-frame vision-language labeling; slot {text} carries the
//              transcript, answer ends with a [a, b, c] label block
//   affectgpt  audio/video/subtitle prompt; slot {subtitle}
//   caption    per-image emotional caption request; no slots
//   judge      pairwise caption similarity; slots {caption_a}, {caption_b}

#include <map>
#include <string>

#include "ovemo/backend.hpp"
#include "ovemo/error.hpp"

namespace ovemo::templates {

inline const PromptTemplate& zero_shot() {
  static const PromptTemplate t{
      "zero_shot",
      "These pictures are different frames of the same video. The words spoken by the "
      "characters in the picture are {text}. Assuming that you are an expert in the field of "
      "emotion, please describe the expression of the character in the picture in detail, and "
      "based on the above description, use a few words to summarize his expression in the "
      "format of [,,**]"};
  return t;
}

inline const PromptTemplate& affectgpt() {
  static const PromptTemplate t{
      "affectgpt",
      "###Human: Close your eyes, open your ears and you imagine only based on the sound that "
      "<Audio><AudioHere></Audio>. Close your ears, open your eyes and you see that "
      "<Video><ImageHere></Video>. The subtitle content of this video is "
      "<Subtitle>{subtitle}</Subtitle>. Now as an expert in the field of emotions, please focus "
      "on the facial expressions, body movements, environment, acoustic information, subtitle "
      "content, etc., in the video to discern clues related to the emotions of the individual. "
      "Please provide a detailed description and ultimately predict the emotional state of the "
      "individual in the video. ###Assistant:"};
  return t;
}

inline const PromptTemplate& caption() {
  static const PromptTemplate t{
      "caption",
      "As an expert in the field of emotions, pay close attention to the facial expressions, "
      "body movements, environment, and subtitle content of the characters in the image to "
      "capture clues closely related to personal emotions, and provide detailed descriptions "
      "based on this, and finally predict the emotional state of the characters in the image."};
  return t;
}

inline const PromptTemplate& judge() {
  static const PromptTemplate t{
      "judge",
      "Please judge whether the emotions described in these two sentences are similar and give "
      "a score between 0 and 1.\nSentence 1: {caption_a}\nSentence 2: {caption_b}"};
  return t;
}

inline std::map<std::string, PromptTemplate> builtin() {
  std::map<std::string, PromptTemplate> out;
  for (const PromptTemplate* t : {&zero_shot(), &affectgpt(), &caption(), &judge()}) {
    out.emplace(t->name, *t);
  }
  return out;
}

}  // namespace ovemo::templates
