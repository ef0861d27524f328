/** Variable naming rules, mirrored from the pipeline's validator.
 *
 * The server validates every patch with the same rules, but running
 * them locally lets the UI badge a bad name before submitting and
 * guarantees a save can never introduce an error the pipeline would
 * choke on. Keep the vocabulary below in lockstep with the package's
 * data/conventions.json.
 */

export interface NamingIssue {
  code: string;
  message: string;
  severity: "error" | "warning";
}

export const CODE_SYNTAX = "syntax";
export const CODE_UPPERCASE = "uppercase";
export const CODE_LEADING_DIGIT = "leading_digit";
export const CODE_RESERVED_UNINDEXED = "reserved_noun_unindexed";
export const CODE_UNKNOWN_ATTRIBUTE = "unknown_attribute";

export const RESERVED_NOUNS = [
  "users",
  "other_parties",
  "attorneys",
  "children",
  "witnesses",
  "guardians",
  "plaintiffs",
  "defendants",
] as const;

export const PERSON_ATTRIBUTES = [
  "name",
  "address",
  "phone",
  "email",
  "birthdate",
  "signature",
  "gender",
] as const;

export const SUB_ATTRIBUTES: Record<string, readonly string[]> = {
  name: ["first", "middle", "last", "suffix", "full"],
  address: [
    "block",
    "line_one",
    "line_two",
    "city",
    "state",
    "zip",
    "county",
    "on_one_line",
  ],
};

const NAME_RE = /^[a-z][a-z0-9_]*$/;
const SEGMENT_RE = /^([^.[\]]*)(?:\[([^\]]*)\])?$/;

function segmentIssues(
  raw: string,
  isFirst: boolean,
): { issues: NamingIssue[]; name: string | null } {
  const m = SEGMENT_RE.exec(raw);
  if (!m || !m[1]) {
    return {
      issues: [
        {
          code: CODE_SYNTAX,
          message: `segment '${raw}' is not name[index]`,
          severity: "error",
        },
      ],
      name: null,
    };
  }
  const name = m[1];
  const index = m[2];
  const issues: NamingIssue[] = [];
  if (index !== undefined && !/^\d+$/.test(index)) {
    issues.push({
      code: CODE_SYNTAX,
      message: `index '${index}' in '${raw}' is not a number`,
      severity: "error",
    });
  }
  if (name !== name.toLowerCase()) {
    issues.push({
      code: CODE_UPPERCASE,
      message: `'${name}' must be lower snake_case`,
      severity: "error",
    });
  } else if (/^\d/.test(name)) {
    issues.push({
      code: CODE_LEADING_DIGIT,
      message: `'${name}' may not start with a digit`,
      severity: "error",
    });
  } else if (!NAME_RE.test(name)) {
    issues.push({
      code: CODE_SYNTAX,
      message: `'${name}' has characters outside [a-z0-9_]`,
      severity: "error",
    });
  }
  if (
    (RESERVED_NOUNS as readonly string[]).includes(name.toLowerCase()) &&
    index === undefined &&
    isFirst
  ) {
    issues.push({
      code: CODE_RESERVED_UNINDEXED,
      message: `'${name}' names a list and needs an index, e.g. ${name}[0]`,
      severity: "error",
    });
  }
  return { issues, name: name.toLowerCase() };
}

/** All rule violations for one variable path; empty array means ok. */
export function validateVariable(path: string): NamingIssue[] {
  if (!path || !path.trim()) {
    return [{ code: CODE_SYNTAX, message: "empty variable path", severity: "error" }];
  }
  if (path !== path.trim()) {
    return [
      { code: CODE_SYNTAX, message: "leading/trailing whitespace", severity: "error" },
    ];
  }

  const issues: NamingIssue[] = [];
  const names: Array<string | null> = [];
  const segments = path.split(".");
  segments.forEach((seg, i) => {
    if (seg === "") {
      issues.push({ code: CODE_SYNTAX, message: "empty path segment", severity: "error" });
      names.push(null);
      return;
    }
    const result = segmentIssues(seg, i === 0);
    issues.push(...result.issues);
    names.push(result.name);
  });

  const hasError = issues.some((v) => v.severity === "error");
  const head = names[0];
  if (!hasError && names.length > 1 && head && (RESERVED_NOUNS as readonly string[]).includes(head)) {
    const attr = names[1];
    if (attr && !(PERSON_ATTRIBUTES as readonly string[]).includes(attr)) {
      issues.push({
        code: CODE_UNKNOWN_ATTRIBUTE,
        message:
          `'${attr}' is not a known person attribute ` +
          `(known: ${PERSON_ATTRIBUTES.join(", ")})`,
        severity: "warning",
      });
    } else if (attr && names.length > 2 && SUB_ATTRIBUTES[attr]) {
      const sub = names[2];
      const known = SUB_ATTRIBUTES[attr];
      if (sub && known && !known.includes(sub)) {
        issues.push({
          code: CODE_UNKNOWN_ATTRIBUTE,
          message: `'${sub}' is not a known ${attr} part (known: ${known.join(", ")})`,
          severity: "warning",
        });
      }
    }
  }
  return issues;
}

/** True when no error-severity issue exists (warnings allowed). */
export function isValidVariable(path: string): boolean {
  return !validateVariable(path).some((v) => v.severity === "error");
}
