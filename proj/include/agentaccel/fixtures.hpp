// Copyright 2026 The agentaccel Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Deterministic synthetic assistant corpus: a 16-tool registry in four
// themes, train/test query splits with skewed tool co-activation, a
// tool-use example database and the prompt templates.

#pragma once

#include <cctype>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "agentaccel/common.hpp"
#include "agentaccel/corpus.hpp"
#include "agentaccel/weaver.hpp"
#include "json.hpp"

namespace agentaccel::fixtures {

using json = nlohmann::json;

struct ToolText {
  const char* id;
  const char* name;
  const char* theme;
  const char* description;
  const char* guidelines;
};

// clang-format off
inline const std::vector<ToolText>& tool_texts() {
  static const std::vector<ToolText> kTools = {
    {"append_note_content", "Append note content", "Notes",
     "append_note_content(note_id: str, content: str) -> str. Appends the given content to the end of an existing note "
     "in the Notes application and returns the updated note identifier. The note must already exist, so its identifier "
     "is usually obtained from a previous open_note call in the same plan.",
     "Use append_note_content only to extend a note, never to create one. Pass the note identifier returned by open_note "
     "as a reference such as $1 instead of guessing it. Keep the appended content short, quote it exactly as the user "
     "phrased it, and do not repeat text that is already in the note."},
    {"compose_new_email", "Compose new email", "Email",
     "compose_new_email(recipients: list[str], cc: list[str], subject: str, context: str, attachments: list[str]) -> str. "
     "Composes and sends a new email from the Mail application. Recipients and cc are lists of email addresses, and "
     "attachments is a list of absolute file paths.",
     "Resolve every recipient to an email address before calling compose_new_email; contact names are not valid "
     "recipients. File attachments must be absolute paths, typically produced by open_and_get_file_path. Leave cc as an "
     "empty list unless the user names extra people, and write the subject in a few plain words."},
    {"create_calendar_event", "Create calendar event", "Scheduling",
     "create_calendar_event(title: str, start_date: str, end_date: str, location: str, invitees: list[str], notes: str) -> str. "
     "Creates an event in the Calendar application and returns the event identifier. Dates use the format YYYY-MM-DD HH:MM "
     "and invitees are email addresses.",
     "Call create_calendar_event once per event. If the user gives only a start time, end the event one hour later. "
     "Invitees must be email addresses, so look them up first when only names are given. Put meeting links or extra "
     "details into notes rather than into the title."},
    {"create_note", "Create note", "Notes",
     "create_note(name: str, content: str) -> str. Creates a new note in the Notes application with the given title and "
     "body and returns the note identifier. The content may be plain text or the output of another tool such as a "
     "document summary.",
     "Use create_note when the user asks to write, save or jot down something new. Choose a short title that reflects the "
     "request. When the body comes from another tool, pass the reference to that output instead of copying text, and "
     "never create two notes for a single request."},
    {"create_reminder", "Create reminder", "Scheduling",
     "create_reminder(name: str, due_date: str, notes: str, list_name: str, priority: int, all_day: bool) -> str. "
     "Creates a reminder in the Reminders application and returns its identifier. The due date uses the format "
     "YYYY-MM-DD HH:MM.",
     "Use create_reminder for tasks the user wants to be alerted about, not for meetings with other people. Default the "
     "priority to 0 and all_day to false unless the user says otherwise. When a reminder accompanies a calendar event, "
     "reuse the same title and time."},
    {"forward_email", "Forward email", "Email",
     "forward_email(recipients: list[str], cc: list[str], context: str, attachments: list[str]) -> str. Forwards the "
     "currently selected email in the Mail application to new recipients, optionally with an added note and extra "
     "attachments.",
     "forward_email always acts on the email currently selected in Mail, so do not search for messages first. "
     "Recipients must be email addresses. Add a short context line only when the user asks to include a message, and "
     "keep cc empty unless people are named explicitly."},
    {"get_email_address", "Get email address", "Contacts",
     "get_email_address(name: str) -> str. Looks up a contact by name in the Contacts application and returns the "
     "primary email address. The name may be a first name, a full name or a nickname stored with the contact.",
     "Call get_email_address once for every person who needs an email address, and call it before any tool that takes "
     "email recipients or invitees. Never invent addresses. If the user already typed a full address, use it directly "
     "instead of looking it up."},
    {"get_phone_number", "Get phone number", "Contacts",
     "get_phone_number(name: str) -> str. Looks up a contact by name in the Contacts application and returns the primary "
     "mobile phone number. The name may be a first name, a full name or a nickname stored with the contact.",
     "Call get_phone_number before send_sms whenever the user refers to a person by name. Look up each person "
     "separately and pass the results as references such as $1. Never guess a number, and do not call this tool when "
     "the user already provided the digits."},
    {"get_zoom_meeting_link", "Get zoom meeting link", "Scheduling",
     "get_zoom_meeting_link(topic: str, start_time: str, duration: int, meeting_invitees: list[str]) -> str. Creates a "
     "Zoom meeting and returns the join link. The start time uses the format YYYY-MM-DD HH:MM and the duration is in "
     "minutes.",
     "Use get_zoom_meeting_link whenever the user mentions a video call or an online meeting. Invitees are email "
     "addresses, so look them up first. Default the duration to 60 minutes. The returned link is usually sent by email, "
     "text message or placed into a calendar event."},
    {"maps_open_location", "Open location in maps", "Scheduling",
     "maps_open_location(location: str) -> str. Opens the given place, address or point of interest in the Maps "
     "application and returns a shareable link to it. The location is free text and is searched like a query typed "
     "into the Maps search field.",
     "Use maps_open_location when the user wants to see where a place is. Pass the place exactly as the user named it. "
     "When the user also wants to travel there, call maps_show_directions with the same destination instead of opening "
     "the place twice."},
    {"maps_show_directions", "Show directions", "Scheduling",
     "maps_show_directions(start_location: str, end_location: str, transport: str) -> str. Shows directions between two "
     "places in the Maps application and returns a shareable link. Transport is one of d for driving, w for walking or "
     "r for transit.",
     "Use maps_show_directions when the user wants to get somewhere. If no start is given, use Current Location. "
     "Default the transport to d for driving unless the user mentions walking or transit, and reuse the destination "
     "of an earlier maps_open_location call when there is one."},
    {"open_and_get_file_path", "Open and get file path", "Notes",
     "open_and_get_file_path(file_name: str) -> str. Searches the file system for a file by name, opens it with the "
     "default application and returns its absolute path. Partial names match the most recently modified file.",
     "Call open_and_get_file_path before any tool that needs an absolute path, such as email attachments or document "
     "summaries. Pass only the file name the user mentioned, without guessing folders, and reuse the returned path as "
     "a reference like $1 in later calls."},
    {"open_note", "Open note", "Notes",
     "open_note(name: str) -> str. Finds an existing note by title in the Notes application, opens it and returns the "
     "note identifier together with its current content. Titles are matched case-insensitively.",
     "Use open_note before reading or changing an existing note. Pass the title as the user said it. Do not call "
     "create_note when the user refers to a note they already have, and pass the returned identifier as a reference "
     "to append_note_content."},
    {"reply_to_email", "Reply to email", "Email",
     "reply_to_email(cc: list[str], context: str, attachments: list[str]) -> str. Replies to the email currently "
     "selected in the Mail application. The reply goes to the original sender and the context is the body of the "
     "answer.",
     "reply_to_email always answers the currently selected email, so never look up the sender first. Write the context "
     "as a complete short answer that follows the user's intent. Leave cc and attachments empty unless the user asks "
     "for them explicitly."},
    {"send_sms", "Send text message", "Contacts",
     "send_sms(recipients: list[str], message: str) -> str. Sends a text message from the Messages application to one or "
     "more phone numbers and returns a delivery status. Messages longer than a few sentences are split automatically.",
     "Recipients must be phone numbers, so call get_phone_number first when the user gives names. Quote the message "
     "as the user wrote it, and when it should contain a link produced by another tool, pass that output as a "
     "reference instead of a placeholder."},
    {"summarize_pdf", "Summarize PDF", "Notes",
     "summarize_pdf(pdf_path: str) -> str. Reads a PDF document from disk and returns a short plain-text summary of its "
     "content. The path must point to an existing PDF file, and very long documents are summarized section by "
     "section.",
     "Use summarize_pdf when the user wants the gist of a document. Pass the file name or the path returned by "
     "open_and_get_file_path. The summary is usually saved with create_note or sent by email, so pass it on as a "
     "reference rather than restating it."},
  };
  return kTools;
}
// clang-format on

inline const std::vector<std::string>& theme_order() {
  static const std::vector<std::string> kThemes = {"Contacts", "Email", "Scheduling", "Notes"};
  return kThemes;
}

// ---------------------------------------------------------------------------
// Prompt templates
// ---------------------------------------------------------------------------

inline weaver::Templates default_templates() {
  weaver::Templates t;
  t.planner_header =
      "You are a planning assistant for a personal computer. Given a user query, create a plan to solve it with the "
      "tools below.";
  t.planner_rules =
      "Rules for every plan:\n"
      "- Each step is a numbered call to exactly one of the available tools, written as name(arguments).\n"
      "- Arguments are quoted strings, lists of quoted strings or references to earlier outputs written as $k.\n"
      "- A reference $k means the output of step k. Only refer to steps that come earlier in the plan.\n"
      "- Never invent contact details, file paths or identifiers; look them up with the matching tool first.\n"
      "- Use as few steps as possible, but do not skip a lookup that a later step depends on.\n"
      "- Independent steps may appear in any order; dependent steps must follow the steps they depend on.\n"
      "- Do not call the same tool twice with the same arguments in one plan.\n"
      "- Dates and times are written as YYYY-MM-DD HH:MM in the local time zone of the user.\n"
      "- When the user says today, tomorrow or a weekday, resolve it relative to the current date.\n"
      "- Quote message bodies, note contents and email text exactly as the user phrased them.\n"
      "- If the query cannot be solved with the available tools, answer with a single join() step.\n"
      "- If the user asks for several things, include all of them in the same plan.\n"
      "- Do not ask the user follow-up questions; make reasonable default choices instead.\n"
      "- Prefer tools from the same application when several tools could solve a step.\n"
      "- Lists of recipients or invitees are written as lists, even when they contain a single entry.\n"
      "- When a step needs several outputs of earlier steps, list every reference explicitly.\n"
      "- Never place a reference inside a quoted string; write it as a bare argument.\n"
      "- The final step is always join(), which collects the outputs of all previous steps.\n"
      "- End the plan with the marker <END_OF_PLAN> directly after join().\n"
      "- Do not explain the plan and do not add comments between the steps.\n"
      "- Keep argument text short and free of personal data the user did not provide.\n"
      "- Durations are integers in minutes and priorities are integers between 0 and 9.\n"
      "- Boolean arguments are written as true or false without quotes.\n"
      "- Use Current Location as the start of directions unless the user names a starting point.\n"
      "- A meeting with other people needs invitees; a reminder never has invitees.\n"
      "- A file that the user names must be located with open_and_get_file_path before it is attached.\n"
      "- Email replies and forwards act on the email that is currently selected in Mail.\n"
      "- Notes that already exist are opened with open_note before they are changed.\n"
      "- Text messages go to phone numbers and emails go to email addresses; never mix them up.\n"
      "- Links produced by one tool can be passed to another tool as references.\n"
      "Here is the list of available tools with their descriptions and guidelines.";
  t.question_prefix = "Question:";
  t.answer_prefix = "Plan:";
  t.arbiter_guidelines =
      "You are the reviewer of an executed plan. You receive the calls that were made and the observation returned by "
      "each call. Decide whether the user's request has been fully handled.\n"
      "- If every call completed and the results answer the request, finish.\n"
      "- If a call failed or returned an error, ask for a new plan that repairs the failure.\n"
      "- If the observations show missing information, ask for a new plan that gathers it.\n"
      "- Never repeat calls that already succeeded.\n"
      "- Answer with one thought and one action. The action is either Finish() or Replan().\n"
      "- Keep the thought to a single sentence that mentions how many calls returned.\n"
      "- Do not restate the observations and do not add information that is not in them.\n"
      "- Finish() ends the task; Replan() starts a new planning round with your thought as feedback.\n"
      "Here are examples of reviews.";
  t.arbiter_examples_single =
      "Call: get_phone_number(Alice)\nObservation: get_phone_number completed for Alice.\n"
      "Thought: all 1 calls returned without errors and the task is complete.\nAction: Finish()\n"
      "Call: open_note(Groceries)\nObservation: open_note completed for Groceries.\n"
      "Thought: all 1 calls returned without errors and the task is complete.\nAction: Finish()\n"
      "Call: create_reminder(Pay rent, tomorrow at 9am)\nObservation: create_reminder completed for Pay rent.\n"
      "Thought: all 1 calls returned without errors and the task is complete.\nAction: Finish()\n"
      "Call: maps_open_location(Union Square)\nObservation: maps_open_location failed with an error.\n"
      "Thought: the only call failed so the request is not handled.\nAction: Replan()\n"
      "Call: summarize_pdf(report.pdf)\nObservation: summarize_pdf completed for report.pdf.\n"
      "Thought: all 1 calls returned without errors and the task is complete.\nAction: Finish()\n"
      "Call: reply_to_email(Thanks, I will be there)\nObservation: reply_to_email completed for Thanks, I will be "
      "there.\nThought: all 1 calls returned without errors and the task is complete.\nAction: Finish()\n"
      "Call: get_email_address(Bob)\nObservation: get_email_address completed for Bob.\n"
      "Thought: all 1 calls returned without errors and the task is complete.\nAction: Finish()\n"
      "Call: create_note(Ideas, plan the offsite)\nObservation: create_note completed for Ideas.\n"
      "Thought: all 1 calls returned without errors and the task is complete.\nAction: Finish()";
  t.arbiter_examples_multi =
      "Call: get_phone_number(Carol)\nObservation: get_phone_number completed for Carol.\n"
      "Call: send_sms($1, running late)\nObservation: send_sms completed.\n"
      "Thought: all 2 calls returned without errors and the task is complete.\nAction: Finish()\n"
      "Call: get_email_address(Dan)\nObservation: get_email_address completed for Dan.\n"
      "Call: get_zoom_meeting_link(design review, Friday at 10am, $1)\nObservation: get_zoom_meeting_link completed "
      "for design review.\n"
      "Call: create_calendar_event(design review, Friday at 10am, $1, $2)\nObservation: create_calendar_event "
      "completed for design review.\n"
      "Thought: all 3 calls returned without errors and the task is complete.\nAction: Finish()\n"
      "Call: open_and_get_file_path(slides.pdf)\nObservation: open_and_get_file_path failed with an error.\n"
      "Call: compose_new_email(team@example.com, slides, $1)\nObservation: compose_new_email was skipped.\n"
      "Thought: the file lookup failed so the email was not sent.\nAction: Replan()\n"
      "Call: create_calendar_event(budget review, Monday at 3pm)\nObservation: create_calendar_event completed for "
      "budget review.\n"
      "Call: create_reminder(budget review, Monday at 3pm)\nObservation: create_reminder completed for budget review.\n"
      "Thought: all 2 calls returned without errors and the task is complete.\nAction: Finish()\n"
      "Call: summarize_pdf(contract.pdf)\nObservation: summarize_pdf completed for contract.pdf.\n"
      "Call: create_note(Contract summary, $1)\nObservation: create_note completed for Contract summary.\n"
      "Thought: all 2 calls returned without errors and the task is complete.\nAction: Finish()\n"
      "Call: maps_open_location(Central Library)\nObservation: maps_open_location completed for Central Library.\n"
      "Call: maps_show_directions(Current Location, Central Library)\nObservation: maps_show_directions completed "
      "for Current Location.\n"
      "Thought: all 2 calls returned without errors and the task is complete.\nAction: Finish()";
  return t;
}

// ---------------------------------------------------------------------------
// Query families
// ---------------------------------------------------------------------------

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next() { return splitmix64(state_); }
  const std::string& pick(const std::vector<std::string>& v) { return v[next() % v.size()]; }

 private:
  std::uint64_t state_;
};

struct Slots {
  std::string person, person2, time, topic, place, file, note, message, item, address;
};

inline Slots draw_slots(Rng& rng) {
  static const std::vector<std::string> kPeople = {"Alice", "Bob", "Carol", "Dan", "Erin", "Frank", "Grace",
                                                   "Heidi", "Ivan", "Judy", "Mallory", "Olivia", "Peggy",
                                                   "Rupert", "Sybil", "Trent", "Victor", "Walter"};
  static const std::vector<std::string> kTimes = {"tomorrow at 5pm", "Friday at 10am", "Monday at 3pm",
                                                  "next Tuesday at noon", "Thursday at 9am", "today at 4pm"};
  static const std::vector<std::string> kTopics = {"budget review", "project sync", "design review",
                                                   "quarterly report", "launch plan", "hiring update"};
  static const std::vector<std::string> kPlaces = {"Golden Gate Park", "the office", "Union Square",
                                                   "the airport", "Central Library", "City Hall"};
  static const std::vector<std::string> kFiles = {"report.pdf", "slides.pdf", "notes.pdf", "contract.pdf",
                                                  "invoice.pdf", "agenda.pdf"};
  static const std::vector<std::string> kNotes = {"Groceries", "Ideas", "Meeting notes", "Travel", "Reading list"};
  static const std::vector<std::string> kMessages = {"running late", "see you soon", "call me back",
                                                     "the meeting moved", "lunch is ready"};
  static const std::vector<std::string> kItems = {"milk", "eggs", "book a hotel", "renew passport", "buy stamps"};
  Slots s;
  s.person = rng.pick(kPeople);
  do {
    s.person2 = rng.pick(kPeople);
  } while (s.person2 == s.person);
  s.time = rng.pick(kTimes);
  s.topic = rng.pick(kTopics);
  s.place = rng.pick(kPlaces);
  s.file = rng.pick(kFiles);
  s.note = rng.pick(kNotes);
  s.message = rng.pick(kMessages);
  s.item = rng.pick(kItems);
  std::string lower = s.person2;
  for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  s.address = lower + "@example.com";
  return s;
}

struct Draft {
  std::string query;
  std::vector<corpus::PlanNode> nodes;
};

struct Family {
  std::string name;
  std::size_t train = 0;
  std::size_t test = 0;
  std::size_t examples = 1;
  std::function<Draft(const Slots&)> make;
};

// clang-format off
inline std::vector<Family> families() {
  using N = corpus::PlanNode;
  return {
    // Video calls: email address travels with the zoom link most of the time.
    {"zoom", 60, 6, 2, [](const Slots& s) { return Draft{
      "Set up a zoom meeting with " + s.person + " about the " + s.topic + " " + s.time,
      {N{"get_email_address", {s.person}}, N{"get_zoom_meeting_link", {s.topic, s.time, "$1"}}}}; }},
    {"zoom_calendar", 25, 3, 1, [](const Slots& s) { return Draft{
      "Schedule a zoom call with " + s.person + " for the " + s.topic + " " + s.time + " and remind me",
      {N{"get_email_address", {s.person}}, N{"get_zoom_meeting_link", {s.topic, s.time, "$1"}},
       N{"create_calendar_event", {s.topic, s.time, "$1", "$2"}}, N{"create_reminder", {s.topic, s.time}}}}; }},
    {"zoom_sms", 6, 1, 1, [](const Slots& s) { return Draft{
      "Create a zoom meeting with " + s.person + " about the " + s.topic + " " + s.time + " and text them the link",
      {N{"get_email_address", {s.person}}, N{"get_zoom_meeting_link", {s.topic, s.time, "$1"}},
       N{"get_phone_number", {s.person}}, N{"send_sms", {"$3", "$2"}}}}; }},
    {"zoom_self", 9, 1, 1, [](const Slots& s) { return Draft{
      "Make a zoom link for the " + s.topic + " " + s.time + ", put it on my calendar and remind me",
      {N{"get_zoom_meeting_link", {s.topic, s.time}}, N{"create_calendar_event", {s.topic, s.time, "$1"}},
       N{"create_reminder", {s.topic, s.time}}}}; }},
    // Pairs.
    {"attach", 40, 4, 2, [](const Slots& s) { return Draft{
      "Email " + s.file + " to " + s.address + " with the subject " + s.topic,
      {N{"open_and_get_file_path", {s.file}}, N{"compose_new_email", {s.address, s.topic, "$1"}}}}; }},
    {"reply_forward", 30, 3, 2, [](const Slots& s) { return Draft{
      "Reply to this email saying " + s.message + " and forward it to " + s.address,
      {N{"reply_to_email", {s.message}}, N{"forward_email", {s.address}}}}; }},
    {"text", 35, 4, 2, [](const Slots& s) { return Draft{
      "Text " + s.person + " that " + s.message,
      {N{"get_phone_number", {s.person}}, N{"send_sms", {"$1", s.message}}}}; }},
    {"event_reminder", 30, 3, 2, [](const Slots& s) { return Draft{
      "Put the " + s.topic + " on my calendar " + s.time + " and remind me about it",
      {N{"create_calendar_event", {s.topic, s.time}}, N{"create_reminder", {s.topic, s.time}}}}; }},
    {"maps", 25, 3, 2, [](const Slots& s) { return Draft{
      "Show me " + s.place + " on the map and how to get there",
      {N{"maps_open_location", {s.place}}, N{"maps_show_directions", {"Current Location", s.place}}}}; }},
    {"summary_note", 25, 3, 2, [](const Slots& s) { return Draft{
      "Summarize " + s.file + " and save the summary as a note called " + s.note,
      {N{"summarize_pdf", {s.file}}, N{"create_note", {s.note, "$1"}}}}; }},
    {"append", 20, 2, 2, [](const Slots& s) { return Draft{
      "Add " + s.item + " to my " + s.note + " note",
      {N{"open_note", {s.note}}, N{"append_note_content", {"$1", s.item}}}}; }},
    // Pair combinations.
    {"event_maps", 15, 2, 1, [](const Slots& s) { return Draft{
      "Schedule the " + s.topic + " at " + s.place + " " + s.time + ", remind me and show directions there",
      {N{"create_calendar_event", {s.topic, s.time, s.place}}, N{"create_reminder", {s.topic, s.time}},
       N{"maps_open_location", {s.place}}, N{"maps_show_directions", {"Current Location", s.place}}}}; }},
    {"mail_all", 4, 1, 1, [](const Slots& s) { return Draft{
      "Reply saying " + s.message + ", forward this email to " + s.address + " and send them " + s.file,
      {N{"reply_to_email", {s.message}}, N{"forward_email", {s.address}},
       N{"open_and_get_file_path", {s.file}}, N{"compose_new_email", {s.address, s.file, "$3"}}}}; }},
    {"notes_all", 4, 1, 1, [](const Slots& s) { return Draft{
      "Summarize " + s.file + " into a new note and add " + s.item + " to my " + s.note + " note",
      {N{"summarize_pdf", {s.file}}, N{"create_note", {s.file, "$1"}},
       N{"open_note", {s.note}}, N{"append_note_content", {"$3", s.item}}}}; }},
    {"text_maps", 6, 1, 1, [](const Slots& s) { return Draft{
      "Get directions to " + s.place + " and text " + s.person + " that I am on my way",
      {N{"maps_open_location", {s.place}}, N{"maps_show_directions", {"Current Location", s.place}},
       N{"get_phone_number", {s.person}}, N{"send_sms", {"$3", "on my way"}}}}; }},
    {"attach_summary", 4, 1, 1, [](const Slots& s) { return Draft{
      "Summarize " + s.file + " as a note and email the file to " + s.address,
      {N{"summarize_pdf", {s.file}}, N{"create_note", {s.file, "$1"}},
       N{"open_and_get_file_path", {s.file}}, N{"compose_new_email", {s.address, s.file, "$3"}}}}; }},
    // Rare three-cluster tail.
    {"zoom_event_maps", 3, 0, 0, [](const Slots& s) { return Draft{
      "Set up a zoom call with " + s.person + " for the " + s.topic + " " + s.time + " at " + s.place +
          ", add it to my calendar, remind me and show directions",
      {N{"get_email_address", {s.person}}, N{"get_zoom_meeting_link", {s.topic, s.time, "$1"}},
       N{"create_calendar_event", {s.topic, s.time, "$1", "$2"}}, N{"create_reminder", {s.topic, s.time}},
       N{"maps_show_directions", {"Current Location", s.place}}}}; }},
    {"text_event_maps", 3, 0, 0, [](const Slots& s) { return Draft{
      "Schedule the " + s.topic + " at " + s.place + " " + s.time + ", remind me, show directions and text " +
          s.person + " the plan",
      {N{"create_calendar_event", {s.topic, s.time, s.place}}, N{"create_reminder", {s.topic, s.time}},
       N{"maps_show_directions", {"Current Location", s.place}}, N{"get_phone_number", {s.person}},
       N{"send_sms", {"$4", s.topic}}}}; }},
    {"mail_summary", 3, 0, 0, [](const Slots& s) { return Draft{
      "Reply saying " + s.message + ", forward this email to " + s.address + " and save a summary of " + s.file,
      {N{"reply_to_email", {s.message}}, N{"forward_email", {s.address}}, N{"summarize_pdf", {s.file}},
       N{"create_note", {s.file, "$3"}}}}; }},
    {"forward_append", 3, 0, 0, [](const Slots& s) { return Draft{
      "Forward this email to " + s.address + " and add " + s.item + " to my " + s.note + " note",
      {N{"forward_email", {s.address}}, N{"open_note", {s.note}}, N{"append_note_content", {"$2", s.item}}}}; }},
    {"zoom_maps", 3, 0, 0, [](const Slots& s) { return Draft{
      "Create a zoom call with " + s.person + " " + s.time + " and show me where " + s.place + " is",
      {N{"get_email_address", {s.person}}, N{"get_zoom_meeting_link", {s.topic, s.time, "$1"}},
       N{"maps_open_location", {s.place}}}}; }},
    // Single-tool requests.
    {"single_phone", 2, 1, 1, [](const Slots& s) { return Draft{
      "What is the phone number of " + s.person, {N{"get_phone_number", {s.person}}}}; }},
    {"single_email", 2, 0, 1, [](const Slots& s) { return Draft{
      "Find the email address of " + s.person, {N{"get_email_address", {s.person}}}}; }},
    {"single_note", 2, 1, 1, [](const Slots& s) { return Draft{
      "Write a note called " + s.note + " that says " + s.item, {N{"create_note", {s.note, s.item}}}}; }},
    {"single_event", 2, 0, 1, [](const Slots& s) { return Draft{
      "Add the " + s.topic + " to my calendar " + s.time, {N{"create_calendar_event", {s.topic, s.time}}}}; }},
    {"single_reminder", 2, 1, 1, [](const Slots& s) { return Draft{
      "Remind me to " + s.item + " " + s.time, {N{"create_reminder", {s.item, s.time}}}}; }},
    {"single_open_map", 2, 0, 1, [](const Slots& s) { return Draft{
      "Where is " + s.place, {N{"maps_open_location", {s.place}}}}; }},
    {"single_directions", 2, 0, 1, [](const Slots& s) { return Draft{
      "How do I get to " + s.place, {N{"maps_show_directions", {"Current Location", s.place}}}}; }},
    {"single_summary", 2, 0, 1, [](const Slots& s) { return Draft{
      "Give me a summary of " + s.file, {N{"summarize_pdf", {s.file}}}}; }},
    {"single_reply", 1, 0, 1, [](const Slots& s) { return Draft{
      "Reply to this email saying " + s.message, {N{"reply_to_email", {s.message}}}}; }},
    {"single_open_note", 1, 0, 1, [](const Slots& s) { return Draft{
      "Open my " + s.note + " note", {N{"open_note", {s.note}}}}; }},
    {"single_forward", 0, 0, 1, [](const Slots& s) { return Draft{
      "Forward this email to " + s.address, {N{"forward_email", {s.address}}}}; }},
    {"single_compose", 0, 0, 1, [](const Slots& s) { return Draft{
      "Send an email to " + s.address + " about the " + s.topic, {N{"compose_new_email", {s.address, s.topic}}}}; }},
    {"single_sms", 0, 0, 1, [](const Slots& s) { return Draft{
      "Send a text to 555 0100 saying " + s.message, {N{"send_sms", {"555 0100", s.message}}}}; }},
    {"single_append", 0, 0, 1, [](const Slots& s) { return Draft{
      "Append " + s.item + " to the note with id note 7", {N{"append_note_content", {"note 7", s.item}}}}; }},
  };
}
// clang-format on

inline corpus::PlanDag to_plan(const Draft& d) {
  corpus::PlanDag p;
  p.nodes = d.nodes;
  for (std::size_t i = 0; i < p.nodes.size(); ++i)
    for (const auto& a : p.nodes[i].args)
      if (corpus::is_reference_arg(a)) p.edges.emplace_back(std::stoul(a.substr(1)) - 1, i);
  return p;
}

inline std::set<std::string> tools_of(const Draft& d) {
  std::set<std::string> out;
  for (const auto& n : d.nodes) out.insert(n.call);
  return out;
}

inline std::string example_text(const Draft& d) {
  return "Question: " + d.query + "\n" + corpus::render_plan(to_plan(d));
}

struct FixtureSet {
  json registry;
  std::vector<json> train;
  std::vector<json> test;
  std::vector<json> examples;
  weaver::Templates templates;
};

inline json sample_json(const Draft& d) {
  auto tools = tools_of(d);
  return {{"query", d.query}, {"tools", std::vector<std::string>(tools.begin(), tools.end())},
          {"plan", corpus::plan_to_json(to_plan(d))}};
}

// Samples are interleaved across families so that prefixes of the files are
// still representative.
inline FixtureSet generate(std::uint64_t seed = 7) {
  FixtureSet f;
  json tools = json::array();
  for (const auto& t : tool_texts())
    tools.push_back({{"id", t.id}, {"name", t.name}, {"theme", t.theme}, {"description", t.description},
                     {"guidelines", t.guidelines}});
  f.registry = {{"themes", theme_order()}, {"tools", tools}};

  auto fams = families();
  Rng rng(seed);
  auto emit = [&](std::vector<json>& out, std::size_t Family::*count) {
    std::vector<std::size_t> left;
    for (const auto& fam : fams) left.push_back(fam.*count);
    bool any = true;
    while (any) {
      any = false;
      for (std::size_t i = 0; i < fams.size(); ++i) {
        if (left[i] == 0) continue;
        --left[i];
        any = true;
        out.push_back(sample_json(fams[i].make(draw_slots(rng))));
      }
    }
  };
  emit(f.train, &Family::train);
  emit(f.test, &Family::test);

  // Every tool except the zoom link and the file lookup gets a single-tool
  // example; those two are served by a two-tool example instead.
  Rng ex_rng(seed ^ 0x5EEDULL);
  for (const auto& fam : fams) {
    for (std::size_t i = 0; i < fam.examples; ++i) {
      auto d = fam.make(draw_slots(ex_rng));
      auto tools_set = tools_of(d);
      f.examples.push_back({{"id", "ex-" + fam.name + "-" + std::to_string(i + 1)},
                            {"example_text", example_text(d)},
                            {"tools", std::vector<std::string>(tools_set.begin(), tools_set.end())}});
    }
  }
  f.templates = default_templates();
  return f;
}

inline std::string to_jsonl(const std::vector<json>& rows) {
  std::string out;
  for (const auto& r : rows) out += r.dump() + "\n";
  return out;
}

inline void write(const FixtureSet& f, const std::filesystem::path& dir) {
  write_file_atomic(dir / "registry.json", f.registry.dump(2) + "\n");
  write_file_atomic(dir / "train.jsonl", to_jsonl(f.train));
  write_file_atomic(dir / "test.jsonl", to_jsonl(f.test));
  write_file_atomic(dir / "examples.jsonl", to_jsonl(f.examples));
  write_file_atomic(dir / "templates.json", f.templates.to_json().dump(2) + "\n");
}

}  // namespace agentaccel::fixtures
