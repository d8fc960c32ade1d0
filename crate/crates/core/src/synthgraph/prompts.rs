//! Prompt builders for the error-insertion model and its quality-control
//! reviser. The templates are fixed; only the input slots vary, so the
//! rendered prompts are stable byte-for-byte across runs.

const INSERTION_TEMPLATE: &str = r#"**Objective:**
Insert six types of errors (as defined below) into the provided candidate sentence (cand) while following the guidelines. Use the provided references (refs) as needed.

**Instructions:**

- **Modify Only Existing Text:**
  - Only change words or phrases that already appear in the candidate sentence (cand).
  - Do not add any extra words, phrases, or information that are not in cand.
  - The overall content must remain exactly as in the original cand aside from the inserted error tags.

- **Maintain Consistency:**
  - When replacing a word, update every reference to that word in the sentence to preserve consistency.
    - *Example:* Changing "three apples" to "seven apples" requires updating all mentions of "three apples" in the sentence.
  - If you replace one term (e.g., "train station" with "bus stop"), ensure that all instances of "train station" are changed accordingly.

- **Scene Text Errors:**
  - Insert text errors only when there is an existing reference to scene text in the original sentence.

- **Error Annotation Format:**
  - Use the following XML-like format to mark errors:
    - `<object original="original object name" id="E1">wrong object name</object>`
    - `<attribute original="original attribute" id="E2" parent="E1">wrong attribute</attribute>`
  - **Rules for Error Tags:**
    - Each error must include:
      - The type of error.
      - A sequential ID.
      - The original text.
      - A parent dependency (if applicable).
        - Once an object is mislabeled, all subsequent references to it must consistently reflect the same error.
        - If subsequent text depends on an existing error, use the same parent ID to denote this dependency.
    - Do not nest error tags.
    - Do not use the same ID for both a current element and its parent.
    - After applying modifications, ensure there are no duplicate IDs.
    - Modifications must be applied to whole words only (do not split a word into parts). For example, changing "beach" by replacing "bea" with "city" and "ch" with "desert" is not allowed.
    - Do not insert tags that result in semantically equivalent replacements. For example, changing "a" to "<number original="a" id="E1">one</number>" is not allowed.

- **Types of Errors:**

  1. **spatial_relation (Spatial Relation Error):**
     - Modify only prepositions that indicate spatial relationships (no grammatical errors allowed).
     - *Example:*
       `"an apple on the table"` →
       `"an apple <spatial_relation original="on" id="E1">under</spatial_relation> the table"`

  2. **attribute (Attribute Error):**
     - Change descriptive attributes such as adjectives or adverbs.
     - *Example:*
       `"Red sky"` →
       `"<attribute original="Red" id="E1">Blue</attribute> sky"`

  3. **object (Object Error):**
     - Replace names of generic objects or entities that are common nouns (i.e., not proper names).
     - *Example:*
       `"There is a chair on the table."` →
       `"There is a <object original="chair" id="E1">book</object> on the table."`
    - Note: For any proper noun or official name (e.g., "John F. Kennedy Center" or "Fuji"), use the fact error as described next.

  4. **fact (Factual Error):**
     - Replace proper, named entities with incorrect names. Apply this error type only to entities that are proper names (e.g., formal institution names, landmarks, or official titles).
     - *Example:*
       `"The image is of the John F. Kennedy Center."` →
       `"The image is of the <named_entities_fact original="John F. Kennedy Center" id="E1">white house</named_entities_fact>."`
     - Important: For any non-proper, generic object or entity (even if it might appear to be an entity), use the object error type instead.

  5. **number (Number Error):**
     - Change numerical values or quantities.
      - *Example:*
       `"3 cats"` →
       `"<number original="3" id="E1">5</number> cats"`
    - If you change a singular quantity to plural (or vice versa), make sure the associated noun reflects the correct number (i.e., use plural form for plural numbers and singular form for singular numbers). No annotation tags are needed for singular/plural noun form adjustments.
        - *Example:*
        `"a cat"` →
        `"<number original="a" id="E1">5</number> cats"`

  6. **text (Text Error):**
     - Change scene text (i.e., text that appears within the image).
     - *Example:*
       `"A car is parked under a sign that says 'Restaurant'."` →
       `"A car is parked under a sign that says <text original="'Restaurant'" id="E1">'Hotel'</text>."`

- **Output Format:**
  - Provide the modified sentence along with error annotations in the following JSON format:

    ```json
    {
      "original": "Two apples in front of a cat. The apples are Fuji.",
      "modified": "<number original="Two" id="E1">nine</number> <object original="apples" id="E2">bananas</object> <spatial_relation original="in front of" id="E3">on</spatial_relation> <object original="a cat" id="E4">a table</object>. The <object original="apples" id="E5" parent="E2">bananas</object> are <named_entities_fact original="Fuji" id="E6">Cavendish</named_entities_fact>."
    }
    ```

  - **Important:**
    - Only modify words that exist in the original cand.
    - Do not add any additional words or phrases.

- **Input:**
  - **Original Sentence (cand):**
    {cand}
  - **Reference (refs):**
    {refs}
"#;

const REVISION_TEMPLATE: &str = r#"You are a quality control assistant tasked with evaluating the output `generated_xml` produced by the LLM (which is the modified version of the provided `original` candidate sentence). Your objective is to ensure that `generated_xml` fully complies with all specified guidelines. Please review the output using the checklist below and then provide a JSON-formatted report detailing your findings. If modifications are necessary, include the revised output.

**Checklist:**

1. **Original Sentence Integrity:**
   - Verify that the value of the `"original"` key exactly matches the provided candidate sentence.
   - Ensure that no modifications, additions, or extra words/phrases have been introduced in the `"original"` value.

2. **Modified Sentence Requirements:**
   - Confirm that the `"modified"` value is the candidate sentence with error annotations inserted.
   - Check that only words or phrases from the candidate sentence have been modified—no new content should be added.
   - *Note:* The meaning of the `"modified"` value may differ from the original.

3. **Error Annotation Types:**
   - Confirm that only the following six error types are used: **spatial_relation, attribute, object, number, named_entities_fact, text**.
   - Verify that each error annotation exactly matches one of these types and is applied only in the appropriate context (for example, text errors are used only for scene text).

4. **Error Tag Format and Consistency:**
   - Each error annotation must use the XML-like tag format:
     ```xml
     <error_type original="original text" id="E#">modified text</error_type>
     ```
   - Ensure that:
     - The tag name is exactly one of the specified error types.
     - The `original` attribute contains the exact original word or phrase from the candidate sentence.
     - The `id` attribute is sequential (e.g., E1, E2, …) with no duplicates.
     - For dependent errors, the child error tag must include the correct `parent` attribute referencing the appropriate error ID.
   - Error tags should only be applied to whole words (no splitting of words), and no error tag should be nested within another.
   - **Whitespace Requirement:** Since tags are treated like words, ensure there is a space immediately after a closing tag. For example, `<attribute>blue</attribute> <object>book</object>` is correct, whereas `<attribute>blue</attribute><object>book</object>` is not acceptable.

5. **Consistency in Modifications:**
   - Verify that if a word is modified in one location, every occurrence of that word in the sentence is modified consistently.
   - Ensure that the same error tag (and, if applicable, the same `parent` attribute) is used for all repeated instances of that word.
   - When one modification depends on another error, ensure that a proper tree structure is maintained using the `parent` attribute.

6. **No Semantically Equivalent Replacements:**
   - Ensure that error annotations do not result in semantically equivalent replacements (e.g., do not replace "a" with a number tag representing "one").

7. **Singular/Plural Adjustments:**
   - If changing a singular quantity to plural (or vice versa), ensure that the associated noun reflects the correct number (i.e., use plural form for plural numbers and singular form for singular numbers).
   - When modifying the noun's number, the change must be performed via a number error tag applied to the noun, with the number error tag for the quantity serving as the parent. If the noun is already modified by an object (or another) tag, the existing tag takes priority but the `parent` attribute should be added.
     - **Example:**
       - `a cat` → `<number original="a" id="E1">three</number> <number original="cat" id="E2" parent="E1">cats</number>`
       - `a cat` → `<number original="a" id="E1">three</number> <object original="cat" id="E2" parent="E1">dogs</object>`

8. **No Article Swapping:**
   - Modifications that swap articles (e.g., changing "a" to "the" or vice versa) are not permitted.

9. **No Unjustified Modifications:**
   - Do not allow changes that cannot be determined solely from the original word. For example, altering `two bible 'Guide'` to `two <named_entities_fact>quran</named_entities_fact> <text>bible</text>` is unacceptable, as it is unrealistic to deduce the appropriate modification for "bible" from the candidate sentence alone.

10. **No Matching Words Between Tagged and Untagged Text:**
   - Ensure that the words within the error tags do not exactly match the corresponding words in the original, untagged text. For instance, transforming "To the left" into `<spatial_relation>To the right</spatial_relation>` is incorrect because the words "To" and "the" are repeated. The proper transformation is to only enclose the modified word: "To the left" should become "To the <spatial_relation>right</spatial_relation>".

11. **Application of Error Annotations for Generic Objects or Entities:**
  - Fundamental Principle: For generic objects or entities expressed by common nouns (i.e., non-proper nouns), do not use the named_entities_fact tag. Always use the object tag.

  - named_entities_fact (Factual Error): This tag should only be used for proper names such as formal institution names, famous landmarks, or official titles. It is only applicable when an incorrect proper name needs to replace the original.

  - object (Object Error): For common objects or entities (non-proper nouns), use this tag instead. In cases where the word does not represent a proper noun, the object tag must be used rather than named_entities_fact.

---

**Output Format:**

After your evaluation, please produce a JSON object with the following keys:

- `"need_update"`: A boolean indicating whether the output requires modifications.
- `"updated_xml"`: The revised output (if modifications are needed) or a copy of the compliant output.
- `"reason"`: A detailed explanation listing any detected violations with clear references to the specific rule(s) broken, or a statement confirming full compliance if no issues are found.

**Example:**
- `original`: a red apple
- `generated_xml`: "<number original="a">3</number> <attribute original="red" >blue</attribute> <object original="apple">books</object>"

```json
{
  "need_update": true,
  "updated_xml": "<number original="a" id="E1">3</number> <attribute original="red" id="E2">blue</attribute> <object original="apple" id="E3" parent="E1">books</object>",
  "reason": "yyy"
}
```

**Input Data:**
- **`original`:**
  {original}
- **`generated_xml`:**
  {output}
"#;

fn render_refs(refs: &[String]) -> String {
    if refs.is_empty() {
        return "[]".to_string();
    }
    refs.iter()
        .map(|r| format!("- {r}"))
        .collect::<Vec<_>>()
        .join("\n    ")
}

/// Fills the error-insertion template with the candidate sentence and its
/// references.
pub fn build_insertion_prompt(seed_text: &str, refs: &[String]) -> String {
    INSERTION_TEMPLATE
        .replace("{cand}", seed_text)
        .replace("{refs}", &render_refs(refs))
}

/// Fills the checking/revision template with the original sentence and
/// the generated XML under review.
pub fn build_revision_prompt(original: &str, generated_xml: &str) -> String {
    REVISION_TEMPLATE
        .replace("{original}", original)
        .replace("{output}", generated_xml)
}
