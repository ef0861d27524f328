/** JSON-pointer helpers matching the server's patch semantics:
 * array indices must already exist, object members may be created only
 * at the leaf, and scalars cannot be descended into.
 */

export function pointerTokens(pointer: string): string[] {
  if (!pointer.startsWith("/")) {
    throw new Error(`JSON pointer must start with '/': '${pointer}'`);
  }
  return pointer
    .split("/")
    .slice(1)
    .map((t) => t.replace(/~1/g, "/").replace(/~0/g, "~"));
}

export function escapeToken(token: string | number): string {
  return String(token).replace(/~/g, "~0").replace(/\//g, "~1");
}

export function joinPointer(...tokens: Array<string | number>): string {
  return "/" + tokens.map(escapeToken).join("/");
}

/** Value at pointer, or undefined when the path does not resolve. */
export function pointerGet(doc: unknown, pointer: string): unknown {
  let node: unknown = doc;
  for (const token of pointerTokens(pointer)) {
    if (Array.isArray(node)) {
      const idx = Number(token);
      if (!Number.isInteger(idx) || idx < 0 || idx >= node.length) return undefined;
      node = node[idx];
    } else if (typeof node === "object" && node !== null) {
      const obj = node as Record<string, unknown>;
      if (!(token in obj)) return undefined;
      node = obj[token];
    } else {
      return undefined;
    }
  }
  return node;
}

/** True when the pointer resolves to an existing location for writing:
 * every interior step exists, and an array leaf index is in range. */
export function pointerWritable(doc: unknown, pointer: string): boolean {
  let tokens: string[];
  try {
    tokens = pointerTokens(pointer);
  } catch {
    return false;
  }
  let node: unknown = doc;
  for (let i = 0; i < tokens.length; i++) {
    const token = tokens[i] as string;
    const last = i === tokens.length - 1;
    if (Array.isArray(node)) {
      const idx = Number(token);
      if (!Number.isInteger(idx) || idx < 0 || idx >= node.length) return false;
      if (!last) node = node[idx];
    } else if (typeof node === "object" && node !== null) {
      const obj = node as Record<string, unknown>;
      if (!last && !(token in obj)) return false;
      if (!last) node = obj[token];
    } else {
      return false;
    }
  }
  return true;
}

/** Set value at pointer in place; throws on paths the server would reject. */
export function pointerSet(doc: unknown, pointer: string, value: unknown): void {
  const tokens = pointerTokens(pointer);
  let node: unknown = doc;
  for (let i = 0; i < tokens.length; i++) {
    const token = tokens[i] as string;
    const last = i === tokens.length - 1;
    if (Array.isArray(node)) {
      const idx = Number(token);
      if (!Number.isInteger(idx) || idx < 0 || idx >= node.length) {
        throw new Error(`index ${token} out of range at '${pointer}'`);
      }
      if (last) {
        node[idx] = value;
      } else {
        node = node[idx];
      }
    } else if (typeof node === "object" && node !== null) {
      const obj = node as Record<string, unknown>;
      if (last) {
        obj[token] = value;
      } else {
        if (!(token in obj)) throw new Error(`no member '${token}' at '${pointer}'`);
        node = obj[token];
      }
    } else {
      throw new Error(`cannot descend into scalar at '${pointer}'`);
    }
  }
}
