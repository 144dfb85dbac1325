// Copyright 2026 The klamp Authors.
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

#ifndef KLAMP_PROMPT_DEFAULTS_HPP
#define KLAMP_PROMPT_DEFAULTS_HPP

#include <string_view>

// Built-in copies of data/prompts/*.txt, used when no prompt directory is
// configured. Keep in sync with the data files.

namespace klamp::prompt_defaults {

inline constexpr std::string_view kSystemTemplate = R"tpl(You are an AI assistant whose primary goal is to suggest a next search query, in order to help a user search and find information better on the search engine. Two different queries and entities are separated by the token ‘|’. For example, ‘Microsoft’ and ‘Google’ would appear as ‘Microsoft’ | ‘Google’.)tpl";

inline constexpr std::string_view kQsTemplate = R"tpl(You are going to suggest a search query that the user would search next based on the current query, and the current session.

The explanations of the query, and session are as follows:
- The query is a specific set of phrases that the user enters into the search engine to find the information or resources related to a particular topic, question, or interest.
- The session refers to a sequence of queries requested by the user on the search engine, within a certain period of time or with regard to the completion of a task.

Read the following query, and session of the user as the context information, which might be helpful and relevant to suggest the next query.
Query: {Query}
Session: {Session}

Based on the above query, and session, please generate one next query suggestion with the rationale, in the format of
Query Suggestion:
Rationale:)tpl";

inline constexpr std::string_view kCqsTemplate = R"tpl(You are going to suggest a search query that the user would search next based on the current query, the current session, and the current article.

The explanations of the query, session, and article are as follows:
- The query is a specific set of phrases that the user enters into the search engine to find the information or resources related to a particular topic, question, or interest.
- The session refers to a sequence of queries requested by the user on the search engine, within a certain period of time or with regard to the completion of a task.
- The article refers to a specific webpage that the user clicks and reads from several search results displayed by the search engine in response to the requested query.

Read the following query, session, and article of the user as the context information, which might be helpful and relevant to suggest the next query.
Query: {Query}
Session: {Session}
Article Title: {ArticleTitle}
Article Text: {ArticleText}

Based on the above query, session, and article, please generate one next query suggestion with the rationale, in the format of
Query Suggestion:
Rationale:)tpl";

inline constexpr std::string_view kCqsKsTemplate = R"tpl(You are going to suggest a search query that the user would search next based on the current query, the current session, the current article, and the related article.

The explanations of the query, session, article, and related article are as follows:
- The query is a specific set of phrases that the user enters into the search engine to find the information or resources related to a particular topic, question, or interest.
- The session refers to a sequence of queries requested by the user on the search engine, within a certain period of time or with regard to the completion of a task.
- The article refers to a specific webpage that the user clicks and reads from several search results displayed by the search engine in response to the requested query.
- The related article refers to a specific webpage that the user had previously read with interest, which may be relevant to the current query, session, and article.

Read the following query, session, article, and related article of the user as the context information, which might be helpful and relevant to suggest the next query.
Query: {Query}
Session: {Session}
Article Title: {ArticleTitle}
Article Text: {ArticleText}
Related Article Title: {RelatedArticleTitle}
Related Article Text: {RelatedArticleText}

Based on the above query, session, article, and related article, please generate one next query suggestion with the rationale, in the format of
Query Suggestion:
Rationale:)tpl";

inline constexpr std::string_view kKlampTemplate = R"tpl(You are going to suggest a search query that the user would search next based on the current query, the current session, the current article, and the personal entities.

The explanations of the query, session, article, and personal entities are as follows:
- The query is a specific set of phrases that the user enters into the search engine to find the information or resources related to a particular topic, question, or interest.
- The session refers to a sequence of queries requested by the user on the search engine, within a certain period of time or with regard to the completion of a task.
- The article refers to a specific webpage that the user clicks and reads from several search results displayed by the search engine in response to the requested query.
- The personal entity refers to a topic, keyword, person, event, or any subject that is specifically relevant or appealing to the individual user based on their personal interests.

Read the following query, session, article, and personal entities of the user as the context information, which might be helpful and relevant to suggest the next query.
Query: {Query}
Session: {Session}
Article Title: {ArticleTitle}
Article Text: {ArticleText}
Personal Entities: {Entities}

Based on the above query, session, article, and personal entities, please generate one next query suggestion with the rationale, in the format of
Query Suggestion:
Rationale:)tpl";

inline constexpr std::string_view kSummarySystemTemplate = R"tpl(You are an AI assistant that describes the interests and knowledge of a search engine user from the entities they engage with most often.)tpl";

inline constexpr std::string_view kSummaryTemplate = R"tpl(The following entities appear most frequently in the user's search and browsing history, ordered by frequency. Two different entities are separated by the token ‘|’.
Entities: {Entities}

Write a short paragraph that states what topics or domains the user may know or care about.)tpl";

}  // namespace klamp::prompt_defaults

#endif  // KLAMP_PROMPT_DEFAULTS_HPP
