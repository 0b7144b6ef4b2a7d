import fs from "node:fs";
import path from "node:path";

// vitest runs rooted at frontend/, so cwd-relative resolution is stable even
// though import.meta.url is rewritten by the DOM test environment
export function loadFixture<T>(name: string): T {
  const file = path.join(process.cwd(), "tests", "fixtures", name);
  return JSON.parse(fs.readFileSync(file, "utf-8")) as T;
}
