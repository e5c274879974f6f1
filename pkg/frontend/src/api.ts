export interface ExerciseInfo {
    exercise_id: string;
    title: string;
}

export interface MessageDto {
    role: "student" | "tutor" | "system";
    content: string;
    timestamp: string;
    sequence: number;
}

export interface SessionDto {
    session_id: string;
    exercise_id: string;
    student_id: string;
    created_at: string;
    state: string;
    messages: MessageDto[];
}

export type Outcome = "answered" | "rejected_off_topic" | "fallback";

export interface PostMessageResult {
    tutor_message: MessageDto;
    outcome: Outcome;
}

export class ApiError extends Error {
    constructor(
        public status: number,
        public code: string,
        message: string,
    ) {
        super(message);
        this.name = "ApiError";
    }
}

/** Thin typed client for the tutoring API; status 0 means the request
 *  never reached the server. */
export class TutorApi {
    constructor(
        private baseUrl: string = "",
        private fetchFn: typeof fetch = (...args) => fetch(...args),
    ) {}

    private async request<T>(path: string, init?: RequestInit): Promise<T> {
        let resp: Response;
        try {
            resp = await this.fetchFn(this.baseUrl + path, init);
        } catch (err) {
            throw new ApiError(0, "network", String(err));
        }
        const body = await resp.json().catch(() => null);
        if (!resp.ok) {
            throw new ApiError(
                resp.status,
                body?.code ?? "unknown",
                body?.message ?? `HTTP ${resp.status}`,
            );
        }
        return body as T;
    }

    private post<T>(path: string, payload: unknown): Promise<T> {
        return this.request<T>(path, {
            method: "POST",
            headers: { "Content-Type": "application/json" },
            body: JSON.stringify(payload),
        });
    }

    listExercises(): Promise<ExerciseInfo[]> {
        return this.request<ExerciseInfo[]>("/api/exercises");
    }

    createSession(exerciseId: string, studentId: string): Promise<SessionDto> {
        return this.post<SessionDto>("/api/sessions", {
            exercise_id: exerciseId,
            student_id: studentId,
        });
    }

    getSession(sessionId: string): Promise<SessionDto> {
        return this.request<SessionDto>(`/api/sessions/${sessionId}`);
    }

    postMessage(sessionId: string, content: string): Promise<PostMessageResult> {
        return this.post<PostMessageResult>(
            `/api/sessions/${sessionId}/messages`,
            { content },
        );
    }
}
