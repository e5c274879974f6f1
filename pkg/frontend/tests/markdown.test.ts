import { describe, expect, it } from "vitest";

import { renderMessageBody } from "../src/markdown.js";

function renderToDiv(raw: string): HTMLDivElement {
    const div = document.createElement("div");
    div.appendChild(renderMessageBody(raw));
    return div;
}

const SAMPLES = [
    "One short hint.",
    "First paragraph.\n\nSecond paragraph.",
    "Loose\n\n\n\nspacing and a trailing break\n\n",
    "Emphasis on *one word* only.",
    "*leading* and *trailing*",
    "a * b and 3*4 are not emphasis",
    "```python\nfor i in range(3):\n    print(i)\n```",
    "Before the code.\n\n```js\nlet x = 1;\n\nlet y = 2;\n```\n\nAfter the code.",
    "An unterminated fence:\n```\nwhile true; do :; done",
    "```\n```",
    "inline ``` backticks mid-sentence",
    "<script>alert('x')</script> stays text",
    "Mixed *em*, code:\n\n```c\nint n = 0;\n```\n\nand 1. a list line.",
];

describe("renderMessageBody", () => {
    it("reproduces every payload character-for-character", () => {
        for (const raw of SAMPLES) {
            expect(renderToDiv(raw).textContent).toBe(raw);
        }
    });

    it("puts fenced code into an inert pre block, blank lines included", () => {
        const raw = "Look:\n\n```js\nlet x = 1;\n\nlet y = 2;\n```";
        const div = renderToDiv(raw);
        const pre = div.querySelector("pre.code-inert");
        expect(pre).not.toBeNull();
        expect(pre!.textContent).toBe("```js\nlet x = 1;\n\nlet y = 2;\n```");
        expect(div.textContent).toBe(raw);
    });

    it("keeps an unterminated fence inert to the end of the message", () => {
        const div = renderToDiv("hint\n```\nrm -rf /");
        expect(div.querySelector("pre.code-inert")!.textContent).toBe("```\nrm -rf /");
    });

    it("never interprets payload as HTML", () => {
        const raw = "<img src=x onerror=alert(1)> and <b>bold?</b>";
        const div = renderToDiv(raw);
        expect(div.querySelector("img")).toBeNull();
        expect(div.querySelector("b")).toBeNull();
        expect(div.textContent).toBe(raw);
    });

    it("wraps *emphasis* without touching the characters", () => {
        const div = renderToDiv("try *this* now");
        const em = div.querySelector("em");
        expect(em).not.toBeNull();
        expect(em!.textContent).toBe("*this*");
    });

    it("splits paragraphs on blank lines", () => {
        const div = renderToDiv("one\n\ntwo\n\nthree");
        const paragraphs = div.querySelectorAll("p");
        expect(paragraphs.length).toBe(3);
        expect(paragraphs[1].textContent).toBe("two");
    });
});
