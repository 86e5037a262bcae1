/**
 * JSON reader that keeps the exact source token of every number.
 *
 * The viewer must display metric values byte-for-byte as they appear in the
 * bundle file ("1.0" must not become "1"), so JSON.parse is not enough: its
 * numbers forget how they were spelled. This parser returns RawNum leaves
 * carrying both the numeric value and the original token.
 */

export class RawNum {
  constructor(
    readonly num: number,
    readonly raw: string,
  ) {}
}

export type JsonValue = null | boolean | string | RawNum | JsonValue[] | JsonObject;
export interface JsonObject {
  [key: string]: JsonValue;
}

export class JsonParseError extends Error {
  constructor(
    message: string,
    readonly position: number,
    readonly line: number,
    readonly column: number,
  ) {
    super(`${message} at line ${line}, column ${column}`);
    this.name = "JsonParseError";
  }
}

const NUMBER = /-?(?:0|[1-9]\d*)(?:\.\d+)?(?:[eE][+-]?\d+)?/y;
const WHITESPACE = new Set([" ", "\t", "\n", "\r"]);

export function parseJsonPreserving(text: string): JsonValue {
  const parser = new Parser(text);
  const value = parser.parseValue();
  parser.skipWhitespace();
  if (!parser.atEnd()) parser.fail("unexpected trailing content");
  return value;
}

class Parser {
  private pos = 0;

  constructor(private readonly text: string) {}

  atEnd(): boolean {
    return this.pos >= this.text.length;
  }

  fail(message: string): never {
    let line = 1;
    let lineStart = 0;
    for (let i = 0; i < this.pos && i < this.text.length; i++) {
      if (this.text[i] === "\n") {
        line++;
        lineStart = i + 1;
      }
    }
    throw new JsonParseError(message, this.pos, line, this.pos - lineStart + 1);
  }

  skipWhitespace(): void {
    while (this.pos < this.text.length && WHITESPACE.has(this.text[this.pos]!)) this.pos++;
  }

  parseValue(): JsonValue {
    this.skipWhitespace();
    if (this.atEnd()) this.fail("unexpected end of input");
    const ch = this.text[this.pos]!;
    if (ch === "{") return this.parseObject();
    if (ch === "[") return this.parseArray();
    if (ch === '"') return this.parseString();
    if (ch === "-" || (ch >= "0" && ch <= "9")) return this.parseNumber();
    if (this.text.startsWith("true", this.pos)) {
      this.pos += 4;
      return true;
    }
    if (this.text.startsWith("false", this.pos)) {
      this.pos += 5;
      return false;
    }
    if (this.text.startsWith("null", this.pos)) {
      this.pos += 4;
      return null;
    }
    this.fail(`unexpected character ${JSON.stringify(ch)}`);
  }

  private parseNumber(): RawNum {
    NUMBER.lastIndex = this.pos;
    const match = NUMBER.exec(this.text);
    if (match === null || match.index !== this.pos) this.fail("malformed number");
    this.pos += match[0].length;
    return new RawNum(Number(match[0]), match[0]);
  }

  private parseString(): string {
    this.pos++; // opening quote
    let out = "";
    for (;;) {
      if (this.atEnd()) this.fail("unterminated string");
      const ch = this.text[this.pos]!;
      if (ch === '"') {
        this.pos++;
        return out;
      }
      if (ch === "\\") {
        this.pos++;
        if (this.atEnd()) this.fail("unterminated escape");
        const esc = this.text[this.pos]!;
        this.pos++;
        switch (esc) {
          case '"': out += '"'; break;
          case "\\": out += "\\"; break;
          case "/": out += "/"; break;
          case "b": out += "\b"; break;
          case "f": out += "\f"; break;
          case "n": out += "\n"; break;
          case "r": out += "\r"; break;
          case "t": out += "\t"; break;
          case "u": {
            const hex = this.text.slice(this.pos, this.pos + 4);
            if (!/^[0-9a-fA-F]{4}$/.test(hex)) this.fail("malformed unicode escape");
            out += String.fromCharCode(parseInt(hex, 16));
            this.pos += 4;
            break;
          }
          default:
            this.pos--;
            this.fail(`invalid escape \\${esc}`);
        }
      } else if (ch.charCodeAt(0) < 0x20) {
        this.fail("unescaped control character in string");
      } else {
        out += ch;
        this.pos++;
      }
    }
  }

  private parseArray(): JsonValue[] {
    this.pos++; // [
    const items: JsonValue[] = [];
    this.skipWhitespace();
    if (this.text[this.pos] === "]") {
      this.pos++;
      return items;
    }
    for (;;) {
      items.push(this.parseValue());
      this.skipWhitespace();
      const ch = this.text[this.pos];
      if (ch === ",") {
        this.pos++;
      } else if (ch === "]") {
        this.pos++;
        return items;
      } else {
        this.fail("expected ',' or ']' in array");
      }
    }
  }

  private parseObject(): JsonObject {
    this.pos++; // {
    const obj: JsonObject = {};
    this.skipWhitespace();
    if (this.text[this.pos] === "}") {
      this.pos++;
      return obj;
    }
    for (;;) {
      this.skipWhitespace();
      if (this.text[this.pos] !== '"') this.fail("expected string key");
      const key = this.parseString();
      this.skipWhitespace();
      if (this.text[this.pos] !== ":") this.fail("expected ':' after key");
      this.pos++;
      obj[key] = this.parseValue();
      this.skipWhitespace();
      const ch = this.text[this.pos];
      if (ch === ",") {
        this.pos++;
      } else if (ch === "}") {
        this.pos++;
        return obj;
      } else {
        this.fail("expected ',' or '}' in object");
      }
    }
  }
}
