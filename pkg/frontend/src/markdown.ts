/* Markdown-light rendering for tutor messages.
 *
 * The hard rule: the rendered DOM text must be character-identical to
 * the payload, so the UI never adds or removes a single character of
 * what the tutor said. Styling only wraps spans; fenced code blocks are
 * emitted as inert plain text inside <pre> (never parsed as HTML).
 */

const FENCE = /```[\s\S]*?```|```[\s\S]*$/g;
const EMPHASIS = /(\*[^*\n]+\*)/;
const PARAGRAPH_BREAK = /(\n{2,})/;

export function renderMessageBody(raw: string): DocumentFragment {
    const fragment = document.createDocumentFragment();
    let last = 0;
    for (const match of raw.matchAll(FENCE)) {
        const start = match.index ?? 0;
        if (start > last) {
            appendProse(fragment, raw.slice(last, start));
        }
        const pre = document.createElement("pre");
        pre.className = "code-inert";
        pre.textContent = match[0];
        fragment.appendChild(pre);
        last = start + match[0].length;
    }
    if (last < raw.length) {
        appendProse(fragment, raw.slice(last));
    }
    return fragment;
}

function appendProse(parent: Node, text: string) {
    // Blank-line separators stay in the DOM as text nodes (invisible
    // between block elements) so textContent stays exact.
    for (const part of text.split(PARAGRAPH_BREAK)) {
        if (!part) {
            continue;
        }
        if (/^\n{2,}$/.test(part)) {
            parent.appendChild(document.createTextNode(part));
            continue;
        }
        const p = document.createElement("p");
        appendEmphasis(p, part);
        parent.appendChild(p);
    }
}

function appendEmphasis(parent: HTMLElement, text: string) {
    for (const part of text.split(EMPHASIS)) {
        if (!part) {
            continue;
        }
        if (part.length > 2 && part.startsWith("*") && part.endsWith("*")) {
            const em = document.createElement("em");
            em.textContent = part; // asterisks kept, text unchanged
            parent.appendChild(em);
        } else {
            parent.appendChild(document.createTextNode(part));
        }
    }
}
